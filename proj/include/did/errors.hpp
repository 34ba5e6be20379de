#pragma once

#include <stdexcept>
#include <string>

namespace did {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// pcap-ingest
struct UnknownMagic : Error { using Error::Error; };
struct UnsupportedLinkType : Error { using Error::Error; };
struct TruncatedHeader : Error { using Error::Error; };
struct TruncatedRecord : Error { using Error::Error; };

// flow-assembly / context
struct OutOfOrderTimestamp : Error { using Error::Error; };

// matrix-builder
struct EmptyFlow : Error { using Error::Error; };

// dataset
struct SingleClassDataset : Error { using Error::Error; };
struct TooFewRecords : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct CorruptRecord : Error { using Error::Error; };
struct BadManifest : Error { using Error::Error; };

// nn-engine
struct DimensionMismatch : Error { using Error::Error; };
struct NaNLoss : Error { using Error::Error; };

// eval
struct LabelOutOfRange : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

}  // namespace did
