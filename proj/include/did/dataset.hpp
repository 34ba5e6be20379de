#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "did/errors.hpp"
#include "did/flow.hpp"
#include "did/matrix.hpp"
#include "did/rng.hpp"

namespace did {

// ---------------------------------------------------------------------------
// Label manifest: ordered first-match-wins rules over flow endpoints.
// One rule per line:
//   class_id class_name proto src_cidr:port dst_cidr:port [t0..t1]
// with `*` wildcards for proto, address, or port.
// ---------------------------------------------------------------------------

struct CidrPort {
  std::uint32_t addr = 0;
  int prefix = 0;                       // 0 = any address
  std::optional<std::uint16_t> port;    // nullopt = any port

  bool matches(std::uint32_t ip, std::uint16_t p) const {
    if (port && *port != p) return false;
    if (prefix == 0) return true;
    std::uint32_t mask = prefix >= 32 ? 0xFFFFFFFFu : ~(0xFFFFFFFFu >> prefix);
    return (ip & mask) == (addr & mask);
  }
};

struct LabelRule {
  int class_id = 0;
  std::string class_name;
  std::optional<Transport> protocol;  // nullopt = any
  CidrPort src;                       // matched against the initiator
  CidrPort dst;                       // matched against the responder
  std::optional<std::pair<std::uint64_t, std::uint64_t>> time_range;  // µs

  bool matches(const FlowRecord& f) const {
    if (protocol && *protocol != f.key.protocol) return false;
    if (!src.matches(ip_to_u32(f.initiator.ip), f.initiator.port)) return false;
    if (!dst.matches(ip_to_u32(f.responder.ip), f.responder.port)) return false;
    if (time_range && (f.start_time_us < time_range->first ||
                       f.start_time_us > time_range->second))
      return false;
    return true;
  }
};

namespace detail {

inline std::uint32_t parse_ipv4(const std::string& s) {
  unsigned a, b, c, d;
  char extra;
  if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &extra) != 4 ||
      a > 255 || b > 255 || c > 255 || d > 255)
    throw BadManifest("bad IPv4 address: " + s);
  return a << 24 | b << 16 | c << 8 | d;
}

inline CidrPort parse_cidr_port(const std::string& tok) {
  CidrPort cp;
  std::string addr = tok, port;
  auto colon = tok.rfind(':');
  if (colon != std::string::npos) {
    addr = tok.substr(0, colon);
    port = tok.substr(colon + 1);
  }
  if (addr != "*") {
    auto slash = addr.find('/');
    if (slash != std::string::npos) {
      cp.prefix = std::stoi(addr.substr(slash + 1));
      addr = addr.substr(0, slash);
    } else {
      cp.prefix = 32;
    }
    if (cp.prefix < 0 || cp.prefix > 32)
      throw BadManifest("bad prefix length in: " + tok);
    cp.addr = parse_ipv4(addr);
  }
  if (!port.empty() && port != "*")
    cp.port = static_cast<std::uint16_t>(std::stoul(port));
  return cp;
}

inline std::string cidr_port_to_string(const CidrPort& cp) {
  std::string s;
  if (cp.prefix == 0) {
    s = "*";
  } else {
    std::array<std::uint8_t, 4> ip{
        static_cast<std::uint8_t>(cp.addr >> 24),
        static_cast<std::uint8_t>(cp.addr >> 16),
        static_cast<std::uint8_t>(cp.addr >> 8),
        static_cast<std::uint8_t>(cp.addr)};
    s = ip_to_string(ip);
    if (cp.prefix != 32) s += "/" + std::to_string(cp.prefix);
  }
  s += ":";
  s += cp.port ? std::to_string(*cp.port) : "*";
  return s;
}

}  // namespace detail

struct LabelManifest {
  std::vector<LabelRule> rules;
  int default_class = 0;

  int label(const FlowRecord& f) const {
    for (const auto& r : rules)
      if (r.matches(f)) return r.class_id;
    return default_class;
  }

  /// Dense class id -> name map, always including class 0 = benign.
  std::map<int, std::string> class_names() const {
    std::map<int, std::string> names;
    names[default_class] = "benign";
    for (const auto& r : rules) names.emplace(r.class_id, r.class_name);
    return names;
  }

  static LabelManifest parse(std::istream& in) {
    LabelManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      LabelRule r;
      std::string proto, src, dst, range;
      if (!(ls >> r.class_id)) continue;  // blank line
      if (!(ls >> r.class_name >> proto >> src >> dst))
        throw BadManifest("manifest line " + std::to_string(lineno) +
                          ": expected `class_id name proto src dst [t0..t1]`");
      if (proto == "tcp") r.protocol = Transport::Tcp;
      else if (proto == "udp") r.protocol = Transport::Udp;
      else if (proto != "*")
        throw BadManifest("manifest line " + std::to_string(lineno) +
                          ": bad protocol " + proto);
      r.src = detail::parse_cidr_port(src);
      r.dst = detail::parse_cidr_port(dst);
      if (ls >> range) {
        if (range.size() < 6 || range.front() != '[' || range.back() != ']')
          throw BadManifest("manifest line " + std::to_string(lineno) +
                            ": bad time range " + range);
        auto dots = range.find("..");
        if (dots == std::string::npos)
          throw BadManifest("manifest line " + std::to_string(lineno) +
                            ": bad time range " + range);
        r.time_range = {std::stoull(range.substr(1, dots - 1)),
                        std::stoull(range.substr(dots + 2,
                                                 range.size() - dots - 3))};
      }
      m.rules.push_back(std::move(r));
    }
    return m;
  }

  static LabelManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label manifest: " + path);
    return parse(in);
  }

  void save(std::ostream& out) const {
    for (const auto& r : rules) {
      out << r.class_id << " " << r.class_name << " "
          << (r.protocol ? (*r.protocol == Transport::Tcp ? "tcp" : "udp")
                         : "*")
          << " " << detail::cidr_port_to_string(r.src) << " "
          << detail::cidr_port_to_string(r.dst);
      if (r.time_range)
        out << " [" << r.time_range->first << ".." << r.time_range->second
            << "]";
      out << "\n";
    }
  }
};

// ---------------------------------------------------------------------------
// Balancing and splits (index-based, deterministic given the seed)
// ---------------------------------------------------------------------------

enum class BalanceMode { Binary, Multiclass };

struct BalanceResult {
  std::vector<std::size_t> kept;  // ascending indices into the input
  bool benign_deficit = false;    // binary mode: fewer benign than attacks
};

/// Binary: keep all attack flows (class != 0), subsample benign to match.
/// Multiclass: subsample every class to the smallest class count.
inline BalanceResult balance(const std::vector<int>& labels, BalanceMode mode,
                             std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);
  if (by_class.size() < 2)
    throw SingleClassDataset("balancing needs at least two classes");

  rng::Engine eng(seed);
  BalanceResult res;
  if (mode == BalanceMode::Binary) {
    std::vector<std::size_t> benign;
    std::size_t attacks = 0;
    for (auto& [cls, idx] : by_class) {
      if (cls == 0) benign = idx;
      else attacks += idx.size();
    }
    if (benign.empty() || attacks == 0)
      throw SingleClassDataset("binary balancing needs benign and attack flows");
    for (auto& [cls, idx] : by_class)
      if (cls != 0)
        res.kept.insert(res.kept.end(), idx.begin(), idx.end());
    if (benign.size() <= attacks) {
      res.kept.insert(res.kept.end(), benign.begin(), benign.end());
      res.benign_deficit = benign.size() < attacks;
    } else {
      rng::shuffle(benign, eng);
      res.kept.insert(res.kept.end(), benign.begin(),
                      benign.begin() + static_cast<std::ptrdiff_t>(attacks));
    }
  } else {
    std::size_t m = SIZE_MAX;
    for (auto& [cls, idx] : by_class) m = std::min(m, idx.size());
    for (auto& [cls, idx] : by_class) {
      rng::shuffle(idx, eng);
      res.kept.insert(res.kept.end(), idx.begin(),
                      idx.begin() + static_cast<std::ptrdiff_t>(m));
    }
  }
  std::sort(res.kept.begin(), res.kept.end());
  return res;
}

enum class SplitTag : std::uint8_t { Train = 0, Val = 1, Test = 2 };

/// Stratified train/val/test assignment. Within each class: seeded shuffle,
/// round(f_train * n) and round(f_val * n), remainder to test, keeping every
/// bucket within +-1 of its exact share.
inline std::vector<SplitTag> split(const std::vector<int>& labels,
                                   double f_train, double f_val, double f_test,
                                   std::uint64_t seed) {
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw Error("split fractions must sum to 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);

  rng::Engine eng(seed);
  std::vector<SplitTag> tags(labels.size(), SplitTag::Test);
  for (auto& [cls, idx] : by_class) {
    rng::shuffle(idx, eng);
    std::size_t n = idx.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(f_train * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(f_val * n));
    if (n_train + n_val > n) n_val = n - n_train;
    for (std::size_t i = 0; i < n; ++i)
      tags[idx[i]] = i < n_train            ? SplitTag::Train
                     : i < n_train + n_val  ? SplitTag::Val
                                            : SplitTag::Test;
  }
  return tags;
}

/// Stratified k-fold assignment; folds are equal-sized ±1 per class.
inline std::vector<int> kfold(const std::vector<int>& labels, int k,
                              std::uint64_t seed) {
  if (k < 2) throw Error("k must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);

  rng::Engine eng(seed);
  std::vector<int> folds(labels.size(), 0);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < static_cast<std::size_t>(k))
      throw TooFewRecords("class " + std::to_string(cls) + " has " +
                          std::to_string(idx.size()) + " records, need >= " +
                          std::to_string(k) + " for " + std::to_string(k) +
                          "-fold");
    rng::shuffle(idx, eng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return folds;
}

inline const char* split_tag_name(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    default: return "test";
  }
}

inline void write_split_manifest(std::ostream& out,
                                 const std::vector<SplitTag>& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i)
    out << i << " " << split_tag_name(tags[i]) << "\n";
}

inline void write_fold_manifest(std::ostream& out,
                                const std::vector<int>& folds) {
  for (std::size_t i = 0; i < folds.size(); ++i)
    out << i << " " << folds[i] << "\n";
}

inline std::vector<SplitTag> read_split_manifest(std::istream& in) {
  std::vector<SplitTag> tags;
  std::size_t idx;
  std::string tag;
  while (in >> idx >> tag) {
    if (idx != tags.size()) throw Error("split manifest indices must be dense");
    if (tag == "train") tags.push_back(SplitTag::Train);
    else if (tag == "val") tags.push_back(SplitTag::Val);
    else if (tag == "test") tags.push_back(SplitTag::Test);
    else throw Error("bad split tag: " + tag);
  }
  return tags;
}

// ---------------------------------------------------------------------------
// DIDM matrix file
//
//   magic "DIDM", version u16 = 1, flags u16, P u32, B u32, count u64
//   [flags & 1: u32 length + producing-config text]
//   per record: u32 flow-id length + bytes, class id u16 (0xFFFF = none),
//               (1+P)(1+B) little-endian f32, row-major
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  // host is little-endian on every supported target
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptRecord("unexpected end of file");
  return v;
}

}  // namespace detail

struct DidmFile {
  MatrixConfig config;        // P, B recovered from the header
  std::string config_text;    // producing RunConfig, empty if absent
  std::vector<FlowMatrix> records;
};

inline void write_matrices(std::ostream& out,
                           const std::vector<FlowMatrix>& records,
                           const MatrixConfig& cfg,
                           const std::string& config_text = "") {
  out.write("DIDM", 4);
  detail::write_le<std::uint16_t>(out, 1);
  detail::write_le<std::uint16_t>(out, config_text.empty() ? 0 : 1);
  detail::write_le<std::uint32_t>(out, cfg.max_packets);
  detail::write_le<std::uint32_t>(out, cfg.max_bytes);
  detail::write_le<std::uint64_t>(out, records.size());
  if (!config_text.empty()) {
    detail::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(config_text.size()));
    out.write(config_text.data(),
              static_cast<std::streamsize>(config_text.size()));
  }
  for (const auto& m : records) {
    if (m.rows != cfg.rows() || m.cols != cfg.cols())
      throw DimensionMismatch("matrix shape does not match the file config");
    detail::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(m.flow_id.size()));
    out.write(m.flow_id.data(), static_cast<std::streamsize>(m.flow_id.size()));
    detail::write_le<std::uint16_t>(
        out, m.label < 0 ? 0xFFFF : static_cast<std::uint16_t>(m.label));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed");
}

inline void write_matrices(const std::string& path,
                           const std::vector<FlowMatrix>& records,
                           const MatrixConfig& cfg,
                           const std::string& config_text = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_matrices(out, records, cfg, config_text);
}

inline DidmFile read_matrices(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DIDM", 4) != 0)
    throw BadMagic("not a DIDM file");
  std::uint16_t version = detail::read_le<std::uint16_t>(in);
  if (version != 1)
    throw VersionMismatch("DIDM version " + std::to_string(version));
  std::uint16_t flags = detail::read_le<std::uint16_t>(in);
  DidmFile f;
  f.config.max_packets = detail::read_le<std::uint32_t>(in);
  f.config.max_bytes = detail::read_le<std::uint32_t>(in);
  std::uint64_t count = detail::read_le<std::uint64_t>(in);
  if (flags & 1) {
    std::uint32_t len = detail::read_le<std::uint32_t>(in);
    f.config_text.resize(len);
    in.read(f.config_text.data(), len);
    if (!in) throw CorruptRecord("truncated config block");
  }
  std::size_t cells =
      static_cast<std::size_t>(f.config.rows()) * f.config.cols();
  f.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      FlowMatrix m;
      m.rows = f.config.rows();
      m.cols = f.config.cols();
      std::uint32_t idlen = detail::read_le<std::uint32_t>(in);
      m.flow_id.resize(idlen);
      in.read(m.flow_id.data(), idlen);
      if (!in) throw CorruptRecord("truncated flow id");
      std::uint16_t cls = detail::read_le<std::uint16_t>(in);
      m.label = cls == 0xFFFF ? -1 : static_cast<std::int32_t>(cls);
      m.values.resize(cells);
      in.read(reinterpret_cast<char*>(m.values.data()),
              static_cast<std::streamsize>(cells * sizeof(float)));
      if (!in) throw CorruptRecord("truncated values");
      f.records.push_back(std::move(m));
    } catch (const CorruptRecord& e) {
      throw CorruptRecord("record " + std::to_string(i) + ": " + e.what());
    }
  }
  return f;
}

inline DidmFile read_matrices(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return read_matrices(in);
}

}  // namespace did
