#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "did/errors.hpp"
#include "did/matrix.hpp"
#include "did/nn/checkpoint.hpp"
#include "did/nn/model.hpp"

namespace did {

inline constexpr const char* kToolVersion = "did 1.0.0";

/// One declarative configuration for a pipeline run; serialized into every
/// produced artifact for provenance. Flat key=value text, CLI flags override.
struct RunConfig {
  MatrixConfig matrix;
  std::size_t ctx_bucket = 1000;       // N flow starts
  std::uint64_t ctx_window_ms = 60000; // T
  std::uint64_t max_flow_ms = 1'200'000;
  std::uint64_t seed = 0;
  double split_train = 0.64, split_val = 0.16, split_test = 0.20;
  nn::Variant variant = nn::Variant::Lstm1b;
  std::size_t n_classes = 2;
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::size_t patience = 10;
  bool zero_context = false;  // blank the context row before training/eval

  std::string to_text() const {
    std::ostringstream out;
    out << "tool=" << kToolVersion << "\n"
        << "max_packets=" << matrix.max_packets << "\n"
        << "max_bytes=" << matrix.max_bytes << "\n"
        << "gap_scale_ms=" << matrix.gap_scale_ms << "\n";
    out << "ctx_scales=";
    for (std::size_t i = 0; i < 5; ++i)
      out << (i ? "," : "") << nn::detail::format_double(matrix.ctx_scales[i]);
    out << "\n"
        << "ctx_bucket=" << ctx_bucket << "\n"
        << "ctx_window_ms=" << ctx_window_ms << "\n"
        << "max_flow_ms=" << max_flow_ms << "\n"
        << "seed=" << seed << "\n"
        << "split=" << nn::detail::format_double(split_train) << ","
        << nn::detail::format_double(split_val) << ","
        << nn::detail::format_double(split_test) << "\n"
        << "variant=" << nn::variant_name(variant) << "\n"
        << "n_classes=" << n_classes << "\n"
        << "lr=" << nn::detail::format_double(lr) << "\n"
        << "batch_size=" << batch_size << "\n"
        << "epochs=" << epochs << "\n"
        << "patience=" << patience << "\n"
        << "zero_context=" << (zero_context ? 1 : 0) << "\n";
    return out.str();
  }

  void apply_line(const std::string& key, const std::string& val) {
    if (key == "tool") return;
    else if (key == "max_packets") matrix.max_packets = std::stoul(val);
    else if (key == "max_bytes") matrix.max_bytes = std::stoul(val);
    else if (key == "gap_scale_ms") matrix.gap_scale_ms = std::stoull(val);
    else if (key == "ctx_scales") {
      std::istringstream ss(val);
      std::string tok;
      std::size_t i = 0;
      while (std::getline(ss, tok, ',') && i < 5)
        matrix.ctx_scales[i++] = std::stod(tok);
    } else if (key == "ctx_bucket") ctx_bucket = std::stoull(val);
    else if (key == "ctx_window_ms") ctx_window_ms = std::stoull(val);
    else if (key == "max_flow_ms") max_flow_ms = std::stoull(val);
    else if (key == "seed") seed = std::stoull(val);
    else if (key == "split") {
      std::istringstream ss(val);
      std::string tok;
      double* dst[3] = {&split_train, &split_val, &split_test};
      for (int i = 0; i < 3 && std::getline(ss, tok, ','); ++i)
        *dst[i] = std::stod(tok);
    } else if (key == "variant") variant = nn::variant_from_name(val);
    else if (key == "n_classes") n_classes = std::stoull(val);
    else if (key == "lr") lr = std::stod(val);
    else if (key == "batch_size") batch_size = std::stoull(val);
    else if (key == "epochs") epochs = std::stoull(val);
    else if (key == "patience") patience = std::stoull(val);
    else if (key == "zero_context") zero_context = (val == "1" || val == "true");
    else throw Error("unknown config key: " + key);
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw Error("bad config line: " + line);
      cfg.apply_line(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
  }
};

}  // namespace did
