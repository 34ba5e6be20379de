// did: offline deep intrusion detection toolkit.
//
// Subcommands cover the whole pipeline: generate labeled captures (synth),
// reassemble flows (extract), build enriched normalized matrices (featurize),
// dataset ops (balance, split), LSTM training (train), scoring (eval,
// predict), and latency measurement (bench).

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "did/config.hpp"
#include "did/dataset.hpp"
#include "did/eval.hpp"
#include "did/nn/checkpoint.hpp"
#include "did/nn/train.hpp"
#include "did/pipeline.hpp"
#include "did/synth.hpp"

namespace {

struct RunConfigFlags {
  CLI::Option* config_path = nullptr;
  CLI::Option* max_packets = nullptr;
  CLI::Option* max_bytes = nullptr;
  CLI::Option* gap_scale_ms = nullptr;
  CLI::Option* ctx_bucket = nullptr;
  CLI::Option* ctx_window_ms = nullptr;
  CLI::Option* max_flow_ms = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* zero_context = nullptr;

  std::string config_file;
  std::uint32_t v_max_packets = 0, v_max_bytes = 0;
  std::uint64_t v_gap_scale = 0, v_ctx_window = 0, v_max_flow = 0, v_seed = 0;
  std::size_t v_ctx_bucket = 0;
  bool v_zero_context = false;

  void add(CLI::App* cmd) {
    config_path = cmd->add_option("--config", config_file,
                                  "key=value run configuration file; explicit "
                                  "flags override it");
    max_packets = cmd->add_option("--max-packets", v_max_packets,
                                  "packets kept per flow (P)");
    max_bytes = cmd->add_option("--max-bytes", v_max_bytes,
                                "bytes kept per packet (B)");
    gap_scale_ms = cmd->add_option("--gap-scale-ms", v_gap_scale,
                                   "time-gap normalization scale");
    ctx_bucket = cmd->add_option("--ctx-bucket", v_ctx_bucket,
                                 "flow-start count bucket (N)");
    ctx_window_ms = cmd->add_option("--ctx-window-ms", v_ctx_window,
                                    "context sliding window (T)");
    max_flow_ms = cmd->add_option("--max-flow-ms", v_max_flow,
                                  "flow inactivity timeout");
    seed = cmd->add_option("--seed", v_seed, "deterministic RNG seed");
    zero_context = cmd->add_flag("--zero-context", v_zero_context,
                                 "blank the context feature row (ablation)");
  }

  did::RunConfig resolve() const {
    did::RunConfig cfg;
    if (config_path->count()) cfg = did::RunConfig::load(config_file);
    if (max_packets->count()) cfg.matrix.max_packets = v_max_packets;
    if (max_bytes->count()) cfg.matrix.max_bytes = v_max_bytes;
    if (gap_scale_ms->count()) cfg.matrix.gap_scale_ms = v_gap_scale;
    if (ctx_bucket->count()) cfg.ctx_bucket = v_ctx_bucket;
    if (ctx_window_ms->count()) cfg.ctx_window_ms = v_ctx_window;
    if (max_flow_ms->count()) cfg.max_flow_ms = v_max_flow;
    if (seed->count()) cfg.seed = v_seed;
    if (zero_context->count()) cfg.zero_context = v_zero_context;
    return cfg;
  }
};

void print_skips(const did::SkipCounters& skips, std::ostream& out) {
  if (skips.total() == 0) return;
  out << "skipped frames:";
  for (std::size_t i = 0;
       i < static_cast<std::size_t>(did::SkipReason::Count_); ++i)
    if (skips.counts[i])
      out << " " << did::SkipCounters::name(static_cast<did::SkipReason>(i))
          << "=" << skips.counts[i];
  out << "\n";
}

std::vector<int> labels_of(const std::vector<did::FlowMatrix>& records,
                           const char* what) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    if (r.label < 0)
      throw did::Error(std::string(what) +
                       " needs labeled records; found an unlabeled one (" +
                       r.flow_id + ")");
    labels.push_back(r.label);
  }
  return labels;
}

std::vector<did::nn::Sample> as_samples(
    const std::vector<did::FlowMatrix>& records) {
  std::vector<did::nn::Sample> s;
  s.reserve(records.size());
  for (const auto& r : records)
    s.push_back({std::span<const float>(r.values), r.label});
  return s;
}

void check_dims(const did::nn::ModelConfig& mc, const did::DidmFile& file,
                const std::string& path) {
  if (mc.seq_len != file.config.rows() || mc.input_dim != file.config.cols())
    throw did::DimensionMismatch(
        path + " holds " + std::to_string(file.config.rows()) + "x" +
        std::to_string(file.config.cols()) + " matrices but the model wants " +
        std::to_string(mc.seq_len) + "x" + std::to_string(mc.input_dim));
}

std::map<int, std::string> default_class_names(std::size_t n) {
  std::map<int, std::string> names;
  names[0] = "benign";
  for (std::size_t c = 1; c < n; ++c)
    names[static_cast<int>(c)] = "class" + std::to_string(c);
  return names;
}

double mean_of(std::vector<double> v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

int run(int argc, char** argv) {
  CLI::App app{"offline flow-based deep intrusion detection toolkit"};
  app.set_version_flag("--version", did::kToolVersion);
  app.require_subcommand(1);

  // --- synth -----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a labeled capture");
  did::synth::ScenarioConfig scen;
  std::string synth_out, synth_labels, attack_kind = "pattern";
  synth->add_option("--out", synth_out, "output pcap path")->required();
  synth->add_option("--labels", synth_labels, "output label manifest path")
      ->required();
  synth->add_option("--benign", scen.n_benign, "benign flow count");
  synth->add_option("--attack", scen.n_attack, "attack flow count");
  synth->add_option("--attack-kind", attack_kind, "pattern|flood|scan|none")
      ->check(CLI::IsMember({"pattern", "flood", "scan", "none"}));
  synth->add_option("--seed", scen.seed, "deterministic RNG seed");
  synth->add_option("--payload-len", scen.payload_len,
                    "benign data packet payload length");
  synth->add_option("--min-turns", scen.min_turns,
                    "minimum request/response turns per TCP flow");
  synth->add_option("--max-turns", scen.max_turns,
                    "maximum request/response turns per TCP flow");
  synth->add_option("--udp-fraction", scen.udp_fraction,
                    "fraction of benign flows carried over UDP");
  synth->add_option("--flood-burst", scen.flood_burst, "flood flows per burst");
  synth->add_flag("--disjoint-pools", scen.disjoint_ip_pools,
                  "give attack flows their own address pools");

  // --- extract ---------------------------------------------------------
  auto* extract = app.add_subcommand("extract", "reassemble and list flows");
  std::string extract_pcap;
  extract->add_option("pcap", extract_pcap, "input capture")->required();
  RunConfigFlags extract_flags;
  extract_flags.add(extract);

  // --- featurize -------------------------------------------------------
  auto* featurize = app.add_subcommand(
      "featurize", "capture -> enriched normalized matrices");
  std::string feat_pcap, feat_labels, feat_out;
  featurize->add_option("pcap", feat_pcap, "input capture")->required();
  featurize->add_option("--labels", feat_labels, "label manifest");
  featurize->add_option("--out", feat_out, "output matrix file")->required();
  RunConfigFlags feat_flags;
  feat_flags.add(featurize);

  // --- balance ---------------------------------------------------------
  auto* balance = app.add_subcommand("balance", "class-balance a matrix file");
  std::string bal_in, bal_out, bal_mode = "binary";
  std::uint64_t bal_seed = 0;
  balance->add_option("input", bal_in, "input matrix file")->required();
  balance->add_option("--out", bal_out, "output matrix file")->required();
  balance->add_option("--mode", bal_mode, "binary|multi")
      ->check(CLI::IsMember({"binary", "multi"}));
  balance->add_option("--seed", bal_seed, "deterministic RNG seed");

  // --- split -----------------------------------------------------------
  auto* split = app.add_subcommand(
      "split", "stratified train/val/test partitions or k folds");
  std::string split_in, split_prefix;
  std::uint64_t split_seed = 0;
  double f_train = 0.64, f_val = 0.16, f_test = 0.20;
  int kfolds = 0;
  split->add_option("input", split_in, "input matrix file")->required();
  split->add_option("--out-prefix", split_prefix, "output path prefix")
      ->required();
  split->add_option("--seed", split_seed, "deterministic RNG seed");
  split->add_option("--train", f_train, "train fraction");
  split->add_option("--val", f_val, "validation fraction");
  split->add_option("--test", f_test, "test fraction");
  split->add_option("--kfold", kfolds,
                    "write a k-fold assignment instead of a 3-way split");

  // --- train -----------------------------------------------------------
  auto* train = app.add_subcommand("train", "train an LSTM classifier");
  std::string train_in, train_val, train_out, train_variant = "lstm-1b";
  std::string history_path;
  std::uint64_t train_seed = 0;
  std::size_t epochs = 30, batch_size = 32, patience = 10, n_classes_opt = 0;
  double lr = 0.001, dropout = 0.20;
  train->add_option("input", train_in, "training matrix file")->required();
  train->add_option("--val", train_val, "validation matrix file")->required();
  train->add_option("--out", train_out, "output checkpoint")->required();
  train->add_option("--variant", train_variant,
                    "lstm-1a|lstm-1b|lstm-2a|lstm-2b");
  train->add_option("--epochs", epochs, "maximum epochs");
  train->add_option("--batch-size", batch_size, "minibatch size");
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--dropout", dropout, "FC dropout rate");
  train->add_option("--patience", patience, "early-stopping patience");
  train->add_option("--classes", n_classes_opt,
                    "class count (default: inferred from the labels)");
  train->add_option("--seed", train_seed, "deterministic RNG seed");
  train->add_option("--history", history_path, "per-epoch loss CSV");

  // --- eval ------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "score a matrix file, report metrics");
  std::string eval_model, eval_in, eval_out;
  eval->add_option("model", eval_model, "checkpoint")->required();
  eval->add_option("input", eval_in, "labeled matrix file")->required();
  eval->add_option("--out", eval_out, "metrics JSON path (default stdout)");

  // --- predict ---------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "per-flow class predictions");
  std::string pred_model, pred_in, pred_out;
  predict->add_option("model", pred_model, "checkpoint")->required();
  predict->add_option("input", pred_in, "matrix file")->required();
  predict->add_option("--out", pred_out, "CSV path (default stdout)");

  // --- bench -----------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "per-flow latency measurement");
  std::string bench_pcap, bench_model;
  bench->add_option("pcap", bench_pcap, "input capture")->required();
  bench->add_option("--model", bench_model,
                    "checkpoint; adds inference timing");
  RunConfigFlags bench_flags;
  bench_flags.add(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  if (*synth) {
    if (attack_kind == "none") scen.n_attack = 0;
    else if (attack_kind == "pattern") scen.attack = did::synth::AttackKind::Pattern;
    else if (attack_kind == "flood") scen.attack = did::synth::AttackKind::Flood;
    else scen.attack = did::synth::AttackKind::Scan;
    auto summary = did::synth::generate(scen, synth_out, synth_labels);
    std::cout << "frames=" << summary.frames << " flows=" << summary.flows;
    for (const auto& [cls, n] : summary.flows_per_class)
      std::cout << " class" << cls << "=" << n;
    std::cout << "\n";
  } else if (*extract) {
    auto cfg = extract_flags.resolve();
    auto res = did::extract_flows(extract_pcap, cfg);
    for (std::size_t i = 0; i < res.flows.size(); ++i) {
      const auto& f = res.flows[i];
      const auto& c = res.context[i];
      std::cout << f.id() << " packets=" << f.packets.size() << " end="
                << (f.termination == did::Termination::Fin ? "fin"
                    : f.termination == did::Termination::Timeout
                        ? "timeout"
                        : "capture-end")
                << " gap_ms=" << c.gap_ms << " src_n=" << c.src_count_bucket
                << " src_t=" << c.src_count_time
                << " dst_n=" << c.dst_count_bucket
                << " dst_t=" << c.dst_count_time << "\n";
    }
    std::cout << "flows=" << res.flows.size()
              << " packets=" << res.packets_decoded << "\n";
    print_skips(res.skips, std::cout);
  } else if (*featurize) {
    auto cfg = feat_flags.resolve();
    std::optional<did::LabelManifest> manifest;
    if (!feat_labels.empty()) manifest = did::LabelManifest::load(feat_labels);
    auto res = did::featurize(feat_pcap, cfg,
                              manifest ? &*manifest : nullptr);
    did::write_matrices(feat_out, res.records, cfg.matrix, cfg.to_text());
    std::cout << "records=" << res.records.size()
              << " packets=" << res.packets_decoded << "\n";
    print_skips(res.skips, std::cout);
  } else if (*balance) {
    auto file = did::read_matrices(bal_in);
    auto labels = labels_of(file.records, "balance");
    auto mode = bal_mode == "binary" ? did::BalanceMode::Binary
                                     : did::BalanceMode::Multiclass;
    auto res = did::balance(labels, mode, bal_seed);
    std::vector<did::FlowMatrix> kept;
    kept.reserve(res.kept.size());
    for (auto i : res.kept) kept.push_back(std::move(file.records[i]));
    did::write_matrices(bal_out, kept, file.config, file.config_text);
    std::cout << "kept=" << kept.size() << " of " << labels.size() << "\n";
    if (res.benign_deficit)
      std::cerr << "warning: fewer benign than attack flows; kept all\n";
  } else if (*split) {
    auto file = did::read_matrices(split_in);
    auto labels = labels_of(file.records, "split");
    if (kfolds > 0) {
      auto folds = did::kfold(labels, kfolds, split_seed);
      std::ofstream out(split_prefix + ".folds.txt");
      if (!out) throw did::IoError("cannot open fold manifest for writing");
      did::write_fold_manifest(out, folds);
      std::cout << "records=" << labels.size() << " folds=" << kfolds << "\n";
    } else {
      auto tags = did::split(labels, f_train, f_val, f_test, split_seed);
      const did::SplitTag parts[3] = {did::SplitTag::Train, did::SplitTag::Val,
                                      did::SplitTag::Test};
      for (auto part : parts) {
        std::vector<did::FlowMatrix> subset;
        for (std::size_t i = 0; i < tags.size(); ++i)
          if (tags[i] == part) subset.push_back(file.records[i]);
        did::write_matrices(
            split_prefix + "." + did::split_tag_name(part) + ".didm", subset,
            file.config, file.config_text);
        std::cout << did::split_tag_name(part) << "=" << subset.size() << " ";
      }
      std::cout << "\n";
      std::ofstream out(split_prefix + ".split.txt");
      if (!out) throw did::IoError("cannot open split manifest for writing");
      did::write_split_manifest(out, tags);
    }
  } else if (*train) {
    auto train_file = did::read_matrices(train_in);
    auto val_file = did::read_matrices(train_val);
    if (train_file.config.rows() != val_file.config.rows() ||
        train_file.config.cols() != val_file.config.cols())
      throw did::DimensionMismatch(
          "training and validation files have different matrix shapes");
    auto labels = labels_of(train_file.records, "train");
    labels_of(val_file.records, "train");
    std::size_t n_classes = n_classes_opt;
    if (n_classes == 0) {
      int mx = 1;
      for (const auto& r : train_file.records) mx = std::max(mx, r.label);
      for (const auto& r : val_file.records) mx = std::max(mx, r.label);
      n_classes = static_cast<std::size_t>(mx) + 1;
    }
    auto mc = did::nn::make_model_config(
        did::nn::variant_from_name(train_variant), n_classes,
        train_file.config.rows(), train_file.config.cols(), train_seed);
    mc.adam.lr = lr;
    mc.dropout_rate = dropout;
    mc.batch_size = batch_size;
    mc.epochs = epochs;
    mc.patience = patience;
    did::nn::Model<float> model(mc);
    auto train_samples = as_samples(train_file.records);
    auto val_samples = as_samples(val_file.records);
    auto result = did::nn::train<float>(model, train_samples, val_samples);
    did::nn::save_checkpoint(train_out, model);
    if (!history_path.empty()) {
      std::ofstream hist(history_path);
      if (!hist) throw did::IoError("cannot open history for writing");
      hist << "epoch,train_loss,val_loss\n";
      for (std::size_t e = 0; e < result.history.size(); ++e)
        hist << (e + 1) << ","
             << did::nn::detail::format_double(result.history[e].train_loss)
             << ","
             << did::nn::detail::format_double(result.history[e].val_loss)
             << "\n";
    }
    std::cout << "epochs=" << result.history.size()
              << " best_epoch=" << result.best_epoch << " best_val_loss="
              << did::nn::detail::format_double(result.best_val_loss) << "\n";
  } else if (*eval) {
    auto model = did::nn::load_checkpoint(eval_model);
    auto file = did::read_matrices(eval_in);
    check_dims(model.config(), file, eval_in);
    auto truths = labels_of(file.records, "eval");
    std::vector<int> preds;
    preds.reserve(file.records.size());
    for (const auto& r : file.records)
      preds.push_back(did::nn::predict(model, r.values));
    auto cm = did::confusion(truths, preds, model.config().n_classes);
    auto j = did::report_to_json(
        cm, did::multiclass_report(cm),
        default_class_names(model.config().n_classes));
    j["records"] = file.records.size();
    std::string text = j.dump(2);
    text += "\n";
    if (eval_out.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(eval_out);
      if (!out) throw did::IoError("cannot open for writing: " + eval_out);
      out << text;
    }
  } else if (*predict) {
    auto model = did::nn::load_checkpoint(pred_model);
    auto file = did::read_matrices(pred_in);
    check_dims(model.config(), file, pred_in);
    std::ostringstream out;
    out << "flow_id,predicted_class\n";
    for (const auto& r : file.records)
      out << r.flow_id << "," << did::nn::predict(model, r.values) << "\n";
    if (pred_out.empty()) {
      std::cout << out.str();
    } else {
      std::ofstream f(pred_out);
      if (!f) throw did::IoError("cannot open for writing: " + pred_out);
      f << out.str();
    }
  } else if (*bench) {
    auto cfg = bench_flags.resolve();
    std::optional<did::nn::Model<float>> model;
    if (!bench_model.empty()) {
      model = did::nn::load_checkpoint(bench_model);
      cfg.matrix.max_packets =
          static_cast<std::uint32_t>(model->config().seq_len - 1);
      cfg.matrix.max_bytes =
          static_cast<std::uint32_t>(model->config().input_dim - 1);
    }
    auto res = did::featurize(bench_pcap, cfg, nullptr, /*timed=*/true);
    std::cout << "flows=" << res.records.size() << "\n"
              << "featurize_ms mean=" << mean_of(res.per_flow_ms)
              << " median=" << median_of(res.per_flow_ms) << "\n";
    if (model) {
      std::vector<double> infer_ms;
      infer_ms.reserve(res.records.size());
      for (const auto& r : res.records) {
        auto t0 = std::chrono::steady_clock::now();
        did::nn::predict(*model, r.values);
        auto t1 = std::chrono::steady_clock::now();
        infer_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::cout << "inference_ms mean=" << mean_of(infer_ms)
                << " median=" << median_of(infer_ms) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
