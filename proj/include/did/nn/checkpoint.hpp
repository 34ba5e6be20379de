#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "did/errors.hpp"
#include "did/nn/model.hpp"

// DIDC checkpoint file:
//   magic "DIDC", version u16 = 1
//   u32 length + model config text (key=value lines)
//   u32 tensor count; per tensor: u32 name length + name, u32 ndims,
//     u32 dims..., little-endian f32 data
//   u64 length + f32 Adam first moments (flat, parameter layout)
//   u64 length + f32 Adam second moments
//   u64 step counter
//   u32 length + RNG state text
namespace did::nn {

namespace detail {

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptRecord("unexpected end of checkpoint");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  std::uint32_t len = read_raw<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CorruptRecord("unexpected end of checkpoint");
  return s;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename It>
std::string join_sizes(It first, It last) {
  std::string s;
  for (It it = first; it != last; ++it) {
    if (!s.empty()) s += ",";
    s += std::to_string(*it);
  }
  return s;
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoull(tok));
  return out;
}

}  // namespace detail

inline std::string model_config_to_text(const ModelConfig& cfg) {
  std::ostringstream out;
  out << "variant=" << variant_name(cfg.variant) << "\n"
      << "lstm_units=" << detail::join_sizes(cfg.lstm_units.begin(),
                                             cfg.lstm_units.end()) << "\n"
      << "fc_units=" << detail::join_sizes(cfg.fc_units.begin(),
                                           cfg.fc_units.end()) << "\n"
      << "dropout_rate=" << detail::format_double(cfg.dropout_rate) << "\n"
      << "n_classes=" << cfg.n_classes << "\n"
      << "input_dim=" << cfg.input_dim << "\n"
      << "seq_len=" << cfg.seq_len << "\n"
      << "seed=" << cfg.seed << "\n"
      << "lr=" << detail::format_double(cfg.adam.lr) << "\n"
      << "beta1=" << detail::format_double(cfg.adam.beta1) << "\n"
      << "beta2=" << detail::format_double(cfg.adam.beta2) << "\n"
      << "eps=" << detail::format_double(cfg.adam.eps) << "\n"
      << "batch_size=" << cfg.batch_size << "\n"
      << "epochs=" << cfg.epochs << "\n"
      << "patience=" << cfg.patience << "\n";
  return out.str();
}

inline ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "variant") cfg.variant = variant_from_name(val);
    else if (key == "lstm_units") cfg.lstm_units = detail::parse_sizes(val);
    else if (key == "fc_units") cfg.fc_units = detail::parse_sizes(val);
    else if (key == "dropout_rate") cfg.dropout_rate = std::stod(val);
    else if (key == "n_classes") cfg.n_classes = std::stoull(val);
    else if (key == "input_dim") cfg.input_dim = std::stoull(val);
    else if (key == "seq_len") cfg.seq_len = std::stoull(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "lr") cfg.adam.lr = std::stod(val);
    else if (key == "beta1") cfg.adam.beta1 = std::stod(val);
    else if (key == "beta2") cfg.adam.beta2 = std::stod(val);
    else if (key == "eps") cfg.adam.eps = std::stod(val);
    else if (key == "batch_size") cfg.batch_size = std::stoull(val);
    else if (key == "epochs") cfg.epochs = std::stoull(val);
    else if (key == "patience") cfg.patience = std::stoull(val);
  }
  return cfg;
}

inline void save_checkpoint(std::ostream& out, Model<float>& model) {
  out.write("DIDC", 4);
  detail::write_raw<std::uint16_t>(out, 1);
  detail::write_string(out, model_config_to_text(model.config()));

  const auto& store = model.params();
  detail::write_raw<std::uint32_t>(
      out, static_cast<std::uint32_t>(store.entries.size()));
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    const auto& e = store.entries[i];
    detail::write_string(out, e.name);
    detail::write_raw<std::uint32_t>(out,
                                     static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims)
      detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(store.data.data() + e.offset),
              static_cast<std::streamsize>(e.size * sizeof(float)));
  }

  auto write_flat = [&out](const std::vector<float>& v) {
    detail::write_raw<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  };
  write_flat(model.adam_m());
  write_flat(model.adam_v());
  detail::write_raw<std::uint64_t>(out, model.step());

  std::ostringstream rng_state;
  rng_state << model.rng();
  detail::write_string(out, rng_state.str());
  if (!out) throw IoError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, Model<float>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  save_checkpoint(out, model);
}

inline Model<float> load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DIDC", 4) != 0)
    throw BadMagic("not a DIDC checkpoint");
  std::uint16_t version = detail::read_raw<std::uint16_t>(in);
  if (version != 1)
    throw VersionMismatch("DIDC version " + std::to_string(version));

  ModelConfig cfg = model_config_from_text(detail::read_string(in));
  Model<float> model(cfg);
  auto& store = model.params();

  std::uint32_t n_tensors = detail::read_raw<std::uint32_t>(in);
  if (n_tensors != store.entries.size())
    throw CorruptRecord("tensor count does not match the config");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = detail::read_string(in);
    const auto& e = store.entries[i];
    if (name != e.name)
      throw CorruptRecord("unexpected tensor " + name + ", wanted " + e.name);
    std::uint32_t ndims = detail::read_raw<std::uint32_t>(in);
    if (ndims != e.dims.size()) throw CorruptRecord("tensor rank mismatch");
    for (std::size_t d = 0; d < ndims; ++d)
      if (detail::read_raw<std::uint32_t>(in) != e.dims[d])
        throw CorruptRecord("tensor shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(store.data.data() + e.offset),
            static_cast<std::streamsize>(e.size * sizeof(float)));
    if (!in) throw CorruptRecord("truncated tensor data");
  }

  auto read_flat = [&in](std::vector<float>& v) {
    std::uint64_t n = detail::read_raw<std::uint64_t>(in);
    if (n != v.size()) throw CorruptRecord("moment size mismatch");
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw CorruptRecord("truncated moments");
  };
  read_flat(model.adam_m());
  read_flat(model.adam_v());
  model.step() = detail::read_raw<std::uint64_t>(in);

  std::istringstream rng_state(detail::read_string(in));
  rng_state >> model.rng();
  return model;
}

inline Model<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return load_checkpoint(in);
}

}  // namespace did::nn
