#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "taf/checkpoint.hpp"
#include "taf/datagen.hpp"
#include "taf/evaluation.hpp"
#include "taf/inference.hpp"
#include "taf/io.hpp"
#include "taf/pseudo_labels.hpp"
#include "taf/svg.hpp"
#include "taf/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace taf;

namespace {

// Invalid command-line / config-file input; maps to exit code 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value config file support with flags-override-file semantics:
// a file value is applied only when the option was not given on the command
// line or via its environment variable. Unknown keys are rejected.
class FileConfig {
 public:
  explicit FileConfig(CLI::App* cmd) {
    cmd->add_option("--config", path_,
                    "key=value config file; explicit flags take precedence");
  }

  template <class T>
  void bind(const std::string& key, CLI::Option* opt, T* target) {
    entries_[key] = {opt, [target](const std::string& v) {
                       if constexpr (std::is_same_v<T, std::string>) {
                         *target = v;
                       } else if constexpr (std::is_same_v<T, double>) {
                         *target = std::stod(v);
                       } else if constexpr (std::is_same_v<T, uint64_t>) {
                         *target = std::stoull(v);
                       } else {
                         *target = static_cast<T>(std::stoll(v));
                       }
                     }};
  }

  void apply() const {
    if (path_.empty()) return;
    std::map<std::string, std::string> kv;
    try {
      kv = parse_key_values(read_text_file(path_));
    } catch (const format_error& e) {
      throw config_error(e.what());
    }
    for (const auto& [key, value] : kv) {
      const auto it = entries_.find(key);
      if (it == entries_.end()) {
        throw config_error("unknown config key '" + key + "'");
      }
      if (it->second.option->count() > 0) continue;  // flag/env wins
      try {
        it->second.set(value);
      } catch (const std::exception&) {
        throw config_error("bad value for config key '" + key + "'");
      }
    }
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::function<void(const std::string&)> set;
  };
  std::string path_;
  std::map<std::string, Entry> entries_;
};

template <class T>
CLI::Option* add_opt(CLI::App* cmd, FileConfig& fc, const std::string& flag,
                     T& target, const std::string& env = "") {
  CLI::Option* opt = cmd->add_option("--" + flag, target);
  if (!env.empty()) opt->envname("TAF_" + env);
  fc.bind(flag, opt, &target);
  return opt;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_config_echo(const fs::path& out_dir, const std::string& echo) {
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.echo", echo);
}

Dataset load_dataset_subset(const std::string& data_dir,
                            const std::string& split_manifest,
                            const std::string& subset) {
  Dataset dataset = load_dataset(data_dir);
  if (!split_manifest.empty()) {
    dataset = load_split(dataset, split_manifest, subset);
  }
  if (dataset.videos.empty()) throw shape_error("empty dataset");
  return dataset;
}

// ---- synth ----

struct SynthArgs {
  SynthConfig cfg;
  std::string out_dir;
  double train_fraction = 0.0;  // 0 = no split manifest
};

void run_synth(const SynthArgs& args) {
  Dataset dataset = generate(args.cfg);
  save_dataset(dataset, args.out_dir);

  std::ostringstream echo;
  echo << "command=synth\n"
       << "synth.num_videos=" << args.cfg.num_videos << '\n'
       << "synth.k=" << args.cfg.k << '\n'
       << "synth.d_in=" << args.cfg.d_in << '\n'
       << "synth.frames_min=" << args.cfg.frames_min << '\n'
       << "synth.frames_max=" << args.cfg.frames_max << '\n'
       << "synth.cluster_sep=" << fmt(args.cfg.cluster_sep) << '\n'
       << "synth.noise_sigma=" << fmt(args.cfg.noise_sigma) << '\n'
       << "synth.permute_prob=" << fmt(args.cfg.permute_prob) << '\n'
       << "synth.missing_prob=" << fmt(args.cfg.missing_prob) << '\n'
       << "synth.seed=" << args.cfg.seed << '\n';
  if (args.train_fraction > 0.0) {
    SplitResult sp = split(dataset, args.train_fraction, args.cfg.seed);
    write_split_manifest(sp.train_ids, sp.test_ids,
                         fs::path(args.out_dir) / "split.json");
    echo << "synth.train_fraction=" << fmt(args.train_fraction) << '\n';
  }
  write_config_echo(args.out_dir, echo.str());
  std::cout << "wrote " << dataset.videos.size() << " videos to "
            << args.out_dir << "\n";
}

// ---- train ----

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  std::string split_manifest;
  std::string subset = "train";
  TrainConfig cfg;
  double sigma = 0.0;  // 0 = default 0.75/K
  int dim = 30;
  double tau = 0.1;
  double tau_prime = 1e-3;
  double encoder_dropout = 0.3;
  double decoder_dropout = 0.1;
  std::string qs_transcript = "estimated";
  std::string qa_transcript = "estimated";
};

std::string train_echo(const TrainArgs& args, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, int k) {
  std::ostringstream echo;
  echo << "command=train\n" << model_config_echo(model_cfg);
  echo << "train.stage1_epochs=" << cfg.stage1_epochs << '\n'
       << "train.stage2_epochs=" << cfg.stage2_epochs << '\n'
       << "train.lr=" << fmt(cfg.lr) << '\n'
       << "train.weight_decay=" << fmt(cfg.weight_decay) << '\n'
       << "train.alpha=" << fmt(cfg.alpha) << '\n'
       << "train.beta=" << fmt(cfg.beta) << '\n'
       << "train.seed=" << cfg.seed << '\n'
       << "train.rho=" << fmt(cfg.sinkhorn.rho) << '\n'
       << "train.sinkhorn_iterations=" << cfg.sinkhorn.iterations << '\n'
       << "train.sigma=" << fmt(cfg.effective_sigma(k)) << '\n'
       << "train.qs_transcript="
       << (cfg.qs_from_estimated_transcript ? "estimated" : "fixed") << '\n'
       << "train.qa_transcript="
       << (cfg.qa_from_estimated_transcript ? "estimated" : "fixed") << '\n'
       << "data.dir=" << args.data_dir << '\n';
  return echo.str();
}

void run_train(TrainArgs& args) {
  Dataset dataset =
      load_dataset_subset(args.data_dir, args.split_manifest, args.subset);

  ModelConfig model_cfg;
  model_cfg.d_in = dataset.d_in;
  model_cfg.d = args.dim;
  model_cfg.k = dataset.k;
  model_cfg.tau = args.tau;
  model_cfg.tau_prime = args.tau_prime;
  model_cfg.encoder_dropout = args.encoder_dropout;
  model_cfg.decoder_dropout = args.decoder_dropout;

  TrainConfig cfg = args.cfg;
  if (args.sigma > 0.0) cfg.sigma = args.sigma;
  cfg.qs_from_estimated_transcript = args.qs_transcript != "fixed";
  cfg.qa_from_estimated_transcript = args.qa_transcript != "fixed";

  const std::string echo = train_echo(args, model_cfg, cfg, dataset.k);
  TrainResult result = train(dataset, cfg, model_cfg);

  fs::create_directories(args.out_dir);
  save_checkpoint(fs::path(args.out_dir) / "checkpoint.taf", result.params,
                  echo);
  write_text_file(fs::path(args.out_dir) / "loss_log.csv",
                  loss_log_csv(result.log));
  write_config_echo(args.out_dir, echo);
  std::cout << "trained on " << dataset.videos.size() << " videos, "
            << result.log.size() << " steps; checkpoint at " << args.out_dir
            << "/checkpoint.taf\n";
}

// ---- segment ----

struct SegmentArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string out_dir;
  std::string split_manifest;
  std::string subset = "test";
  std::string source = "align";
  int min_seg_frames = 1;
  double rho = 0.0;    // 0 = take from checkpoint echo
  int iterations = 0;  // 0 = take from checkpoint echo
  double sigma = 0.0;  // 0 = take from checkpoint echo
};

void run_segment(const SegmentArgs& args) {
  Dataset dataset =
      load_dataset_subset(args.data_dir, args.split_manifest, args.subset);
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const auto kv = parse_key_values(ckpt.config_echo);

  SinkhornConfig sinkhorn;
  sinkhorn.rho = args.rho > 0.0 ? args.rho
                 : kv.count("train.rho") ? std::stod(kv.at("train.rho"))
                                         : 0.07;
  sinkhorn.iterations =
      args.iterations > 0 ? args.iterations
      : kv.count("train.sinkhorn_iterations")
          ? std::stoi(kv.at("train.sinkhorn_iterations"))
          : 3;
  const double sigma =
      args.sigma > 0.0 ? args.sigma
      : kv.count("train.sigma") ? std::stod(kv.at("train.sigma"))
                                : default_prior_sigma(ckpt.params.cfg.k);

  DecodeConfig decode_cfg;
  decode_cfg.source = args.source == "frame" ? ProbSource::kFrameProbs
                                             : ProbSource::kAlignProbs;
  decode_cfg.min_seg_frames = args.min_seg_frames;

  fs::create_directories(args.out_dir);
  for (const VideoSample& video : dataset.videos) {
    SegmentVideoResult result =
        segment_video(video.features, ckpt.params, sinkhorn, sigma, decode_cfg);
    const std::string base = video.features.video_id;
    write_prediction_csv(result.segmentation,
                         fs::path(args.out_dir) / (base + ".pred.csv"));

    json segs = json::array();
    for (const Segment& s : result.segmentation.segments) {
      segs.push_back({{"action", s.action}, {"start", s.start}, {"end", s.end}});
    }
    json doc;
    doc["video"] = base;
    doc["transcript"] = result.transcript.actions();
    doc["segments"] = segs;
    write_text_file(fs::path(args.out_dir) / (base + ".segments.json"),
                    doc.dump(2) + "\n");

    write_svg(fs::path(args.out_dir) / (base + ".svg"),
              svg_label_bands(
                  {video.ground_truth.framewise, result.segmentation.framewise},
                  {"ground truth", "prediction"}, dataset.k));
  }

  std::ostringstream echo;
  echo << "command=segment\n"
       << "segment.checkpoint=" << args.checkpoint << '\n'
       << "segment.source=" << args.source << '\n'
       << "segment.min_seg_frames=" << args.min_seg_frames << '\n'
       << "segment.rho=" << fmt(sinkhorn.rho) << '\n'
       << "segment.sinkhorn_iterations=" << sinkhorn.iterations << '\n'
       << "segment.sigma=" << fmt(sigma) << '\n'
       << "data.dir=" << args.data_dir << '\n';
  write_config_echo(args.out_dir, echo.str());
  std::cout << "segmented " << dataset.videos.size() << " videos into "
            << args.out_dir << "\n";
}

// ---- eval ----

struct EvalArgs {
  std::string data_dir;
  std::string pred_dir;
  std::string out_dir;
  std::string split_manifest;
  std::string subset = "test";
};

void run_eval(const EvalArgs& args) {
  Dataset dataset =
      load_dataset_subset(args.data_dir, args.split_manifest, args.subset);

  std::vector<EvalVideo> videos;
  for (const VideoSample& v : dataset.videos) {
    const fs::path pred_path =
        fs::path(args.pred_dir) / (v.features.video_id + ".pred.csv");
    EvalVideo ev;
    ev.video_id = v.features.video_id;
    ev.activity = v.activity;
    ev.ground_truth = v.ground_truth;
    ev.prediction = make_segmentation(read_prediction_csv(pred_path));
    videos.push_back(std::move(ev));
  }

  EvalReport report = evaluate(videos, dataset.k, dataset.k);

  json doc;
  doc["mof"] = report.mof;
  doc["f1"] = report.f1;
  doc["per_video_f1"] = json::array();
  for (const auto& [id, f1] : report.per_video_f1) {
    doc["per_video_f1"].push_back({{"video", id}, {"f1", f1}});
  }
  doc["activities"] = json::array();
  fs::create_directories(args.out_dir);
  for (const ActivityEval& ae : report.activities) {
    json a;
    a["activity"] = ae.activity;
    a["mof"] = ae.mof;
    a["mapping"] = ae.mapping;
    a["matched_frames"] = ae.matched_frames;
    a["scored_frames"] = ae.scored_frames;
    doc["activities"].push_back(a);
    write_matrix_csv(ae.confusion, fs::path(args.out_dir) /
                                       ("confusion_" + ae.activity + ".csv"));
  }
  write_text_file(fs::path(args.out_dir) / "eval_report.json",
                  doc.dump(2) + "\n");

  std::ostringstream echo;
  echo << "command=eval\n"
       << "eval.pred_dir=" << args.pred_dir << '\n'
       << "data.dir=" << args.data_dir << '\n';
  write_config_echo(args.out_dir, echo.str());

  std::printf("%-12s %8s %8s\n", "activity", "MOF", "frames");
  for (const ActivityEval& ae : report.activities) {
    std::printf("%-12s %8.4f %8ld\n", ae.activity.c_str(), ae.mof,
                ae.scored_frames);
  }
  std::printf("%-12s %8.4f\n", "MOF", report.mof);
  std::printf("%-12s %8.4f\n", "F1@50", report.f1);
}

// ---- inspect ----

struct InspectPriorsArgs {
  long b = 32;
  int k = 5;
  double sigma = 0.0;
  std::string transcript;  // comma separated, empty = fixed order
  std::string out_dir;
};

void run_inspect_priors(const InspectPriorsArgs& args) {
  const double sigma =
      args.sigma > 0.0 ? args.sigma : default_prior_sigma(args.k);
  PriorMatrix prior;
  std::string name;
  if (args.transcript.empty()) {
    prior = build_fixed_order_prior(args.b, args.k, sigma);
    name = "prior_fixed";
  } else {
    std::vector<int> actions;
    std::stringstream ss(args.transcript);
    std::string cell;
    while (std::getline(ss, cell, ',')) actions.push_back(std::stoi(cell));
    prior = build_permutation_prior(args.b, args.k, sigma,
                                    Transcript(std::move(actions)));
    name = "prior_transcript";
  }
  fs::create_directories(args.out_dir);
  write_matrix_csv(prior.values, fs::path(args.out_dir) / (name + ".csv"));
  write_svg(fs::path(args.out_dir) / (name + ".svg"),
            svg_heatmap(prior.values, name));
  std::ostringstream echo;
  echo << "command=inspect-priors\n"
       << "inspect.b=" << args.b << '\n'
       << "inspect.k=" << args.k << '\n'
       << "inspect.sigma=" << fmt(sigma) << '\n'
       << "inspect.transcript=" << args.transcript << '\n';
  write_config_echo(args.out_dir, echo.str());
  std::cout << "wrote " << name << " to " << args.out_dir << "\n";
}

struct InspectModelArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string video;
  std::string out_dir;
};

const VideoSample& find_video(const Dataset& dataset, const std::string& id) {
  for (const VideoSample& v : dataset.videos) {
    if (id.empty() || v.features.video_id == id) return v;
  }
  throw io_error("video '" + id + "' not found in dataset");
}

void run_inspect_codes(const InspectModelArgs& args) {
  Dataset dataset = load_dataset(args.data_dir);
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const auto kv = parse_key_values(ckpt.config_echo);
  SinkhornConfig sinkhorn;
  if (kv.count("train.rho")) sinkhorn.rho = std::stod(kv.at("train.rho"));
  if (kv.count("train.sinkhorn_iterations")) {
    sinkhorn.iterations = std::stoi(kv.at("train.sinkhorn_iterations"));
  }
  const double sigma = kv.count("train.sigma")
                           ? std::stod(kv.at("train.sigma"))
                           : default_prior_sigma(ckpt.params.cfg.k);

  const VideoSample& video = find_video(dataset, args.video);
  const EncoderTrace enc = encode(video.features.frames, ckpt.params);
  const Prototypes protos{ckpt.params.prototypes};

  const CodeMatrix q_f =
      frame_pseudo_labels(enc.output, protos, sinkhorn, sigma);
  const Transcript t = estimate_transcript(q_f);
  const CodeMatrix q_s = segment_pseudo_labels(t, ckpt.params.cfg.k);
  const CodeMatrix q_a =
      alignment_pseudo_labels(enc.output, protos, t, sinkhorn, sigma);

  fs::create_directories(args.out_dir);
  const std::string base = video.features.video_id;
  auto dump = [&](const CodeMatrix& m, const std::string& tag) {
    write_matrix_csv(m.values,
                     fs::path(args.out_dir) / (base + "." + tag + ".csv"));
    write_svg(fs::path(args.out_dir) / (base + "." + tag + ".svg"),
              svg_heatmap(m.values, base + " " + tag));
  };
  dump(q_f, "qf");
  dump(q_s, "qs");
  dump(q_a, "qa");

  std::ostringstream ts;
  for (int i = 0; i < t.size(); ++i) ts << (i ? "," : "") << t[i];
  write_text_file(fs::path(args.out_dir) / (base + ".transcript.txt"),
                  ts.str() + "\n");
  std::ostringstream echo;
  echo << "command=inspect-codes\n"
       << "inspect.video=" << base << '\n'
       << "inspect.checkpoint=" << args.checkpoint << '\n'
       << "data.dir=" << args.data_dir << '\n';
  write_config_echo(args.out_dir, echo.str());
  std::cout << "wrote codes for " << base << " to " << args.out_dir << "\n";
}

void run_inspect_attention(const InspectModelArgs& args) {
  Dataset dataset = load_dataset(args.data_dir);
  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const auto kv = parse_key_values(ckpt.config_echo);
  SinkhornConfig sinkhorn;
  if (kv.count("train.rho")) sinkhorn.rho = std::stod(kv.at("train.rho"));
  if (kv.count("train.sinkhorn_iterations")) {
    sinkhorn.iterations = std::stoi(kv.at("train.sinkhorn_iterations"));
  }
  const double sigma = kv.count("train.sigma")
                           ? std::stod(kv.at("train.sigma"))
                           : default_prior_sigma(ckpt.params.cfg.k);

  const VideoSample& video = find_video(dataset, args.video);
  const EncoderTrace enc = encode(video.features.frames, ckpt.params);
  const CodeMatrix q_f = frame_pseudo_labels(
      enc.output, Prototypes{ckpt.params.prototypes}, sinkhorn, sigma);
  const Transcript t = estimate_transcript(q_f);
  const DecoderTrace dec = decode(t, enc.output, ckpt.params);

  fs::create_directories(args.out_dir);
  const std::string base = video.features.video_id;
  auto dump = [&](const Matrix& m, const std::string& tag) {
    write_matrix_csv(m, fs::path(args.out_dir) / (base + "." + tag + ".csv"));
    write_svg(fs::path(args.out_dir) / (base + "." + tag + ".svg"),
              svg_heatmap(m, base + " " + tag));
  };
  for (size_t l = 0; l < enc.layers.size(); ++l) {
    dump(enc.layers[l].attn.weights, "enc" + std::to_string(l) + ".self");
  }
  for (size_t l = 0; l < dec.layers.size(); ++l) {
    dump(dec.layers[l].self_attn.weights, "dec" + std::to_string(l) + ".self");
    dump(dec.layers[l].cross_attn.weights,
         "dec" + std::to_string(l) + ".cross");
  }
  std::ostringstream echo;
  echo << "command=inspect-attention\n"
       << "inspect.video=" << base << '\n'
       << "inspect.checkpoint=" << args.checkpoint << '\n'
       << "data.dir=" << args.data_dir << '\n';
  write_config_echo(args.out_dir, echo.str());
  std::cout << "wrote attention maps for " << base << " to " << args.out_dir
            << "\n";
}

void require_set(const std::string& value, const std::string& flag) {
  if (value.empty()) throw config_error("--" + flag + " is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal activity segmentation toolkit"};
  app.require_subcommand(1);

  // synth
  SynthArgs synth_args;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic dataset");
  FileConfig synth_fc(synth_cmd);
  add_opt(synth_cmd, synth_fc, "out-dir", synth_args.out_dir, "OUT_DIR");
  add_opt(synth_cmd, synth_fc, "videos", synth_args.cfg.num_videos);
  add_opt(synth_cmd, synth_fc, "k", synth_args.cfg.k);
  add_opt(synth_cmd, synth_fc, "d-in", synth_args.cfg.d_in);
  add_opt(synth_cmd, synth_fc, "frames-min", synth_args.cfg.frames_min);
  add_opt(synth_cmd, synth_fc, "frames-max", synth_args.cfg.frames_max);
  add_opt(synth_cmd, synth_fc, "cluster-sep", synth_args.cfg.cluster_sep);
  add_opt(synth_cmd, synth_fc, "noise-sigma", synth_args.cfg.noise_sigma);
  add_opt(synth_cmd, synth_fc, "permute-prob", synth_args.cfg.permute_prob);
  add_opt(synth_cmd, synth_fc, "missing-prob", synth_args.cfg.missing_prob);
  add_opt(synth_cmd, synth_fc, "seed", synth_args.cfg.seed, "SEED");
  add_opt(synth_cmd, synth_fc, "train-fraction", synth_args.train_fraction);
  synth_cmd->callback([&] {
    synth_fc.apply();
    require_set(synth_args.out_dir, "out-dir");
    run_synth(synth_args);
  });

  // train
  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  FileConfig train_fc(train_cmd);
  add_opt(train_cmd, train_fc, "data", train_args.data_dir, "DATA");
  add_opt(train_cmd, train_fc, "out-dir", train_args.out_dir, "OUT_DIR");
  add_opt(train_cmd, train_fc, "split-manifest", train_args.split_manifest);
  add_opt(train_cmd, train_fc, "subset", train_args.subset);
  add_opt(train_cmd, train_fc, "stage1-epochs", train_args.cfg.stage1_epochs);
  add_opt(train_cmd, train_fc, "stage2-epochs", train_args.cfg.stage2_epochs);
  add_opt(train_cmd, train_fc, "lr", train_args.cfg.lr);
  add_opt(train_cmd, train_fc, "weight-decay", train_args.cfg.weight_decay);
  add_opt(train_cmd, train_fc, "alpha", train_args.cfg.alpha);
  add_opt(train_cmd, train_fc, "beta", train_args.cfg.beta);
  add_opt(train_cmd, train_fc, "seed", train_args.cfg.seed, "SEED");
  add_opt(train_cmd, train_fc, "rho", train_args.cfg.sinkhorn.rho);
  add_opt(train_cmd, train_fc, "sinkhorn-iters",
          train_args.cfg.sinkhorn.iterations);
  add_opt(train_cmd, train_fc, "sigma", train_args.sigma);
  add_opt(train_cmd, train_fc, "dim", train_args.dim);
  add_opt(train_cmd, train_fc, "tau", train_args.tau);
  add_opt(train_cmd, train_fc, "tau-prime", train_args.tau_prime);
  add_opt(train_cmd, train_fc, "encoder-dropout", train_args.encoder_dropout);
  add_opt(train_cmd, train_fc, "decoder-dropout", train_args.decoder_dropout);
  add_opt(train_cmd, train_fc, "qs-transcript", train_args.qs_transcript)
      ->check(CLI::IsMember({"estimated", "fixed"}));
  add_opt(train_cmd, train_fc, "qa-transcript", train_args.qa_transcript)
      ->check(CLI::IsMember({"estimated", "fixed"}));
  train_cmd->callback([&] {
    train_fc.apply();
    require_set(train_args.data_dir, "data");
    require_set(train_args.out_dir, "out-dir");
    run_train(train_args);
  });

  // segment
  SegmentArgs segment_args;
  CLI::App* segment_cmd =
      app.add_subcommand("segment", "segment videos with a checkpoint");
  FileConfig segment_fc(segment_cmd);
  add_opt(segment_cmd, segment_fc, "data", segment_args.data_dir, "DATA");
  add_opt(segment_cmd, segment_fc, "checkpoint", segment_args.checkpoint);
  add_opt(segment_cmd, segment_fc, "out-dir", segment_args.out_dir, "OUT_DIR");
  add_opt(segment_cmd, segment_fc, "split-manifest",
          segment_args.split_manifest);
  add_opt(segment_cmd, segment_fc, "subset", segment_args.subset);
  add_opt(segment_cmd, segment_fc, "source", segment_args.source)
      ->check(CLI::IsMember({"align", "frame"}));
  add_opt(segment_cmd, segment_fc, "min-seg-frames",
          segment_args.min_seg_frames);
  add_opt(segment_cmd, segment_fc, "rho", segment_args.rho);
  add_opt(segment_cmd, segment_fc, "sinkhorn-iters", segment_args.iterations);
  add_opt(segment_cmd, segment_fc, "sigma", segment_args.sigma);
  segment_cmd->callback([&] {
    segment_fc.apply();
    require_set(segment_args.data_dir, "data");
    require_set(segment_args.checkpoint, "checkpoint");
    require_set(segment_args.out_dir, "out-dir");
    run_segment(segment_args);
  });

  // eval
  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score predictions against ground truth");
  FileConfig eval_fc(eval_cmd);
  add_opt(eval_cmd, eval_fc, "data", eval_args.data_dir, "DATA");
  add_opt(eval_cmd, eval_fc, "pred", eval_args.pred_dir);
  add_opt(eval_cmd, eval_fc, "out-dir", eval_args.out_dir, "OUT_DIR");
  add_opt(eval_cmd, eval_fc, "split-manifest", eval_args.split_manifest);
  add_opt(eval_cmd, eval_fc, "subset", eval_args.subset);
  eval_cmd->callback([&] {
    eval_fc.apply();
    require_set(eval_args.data_dir, "data");
    require_set(eval_args.pred_dir, "pred");
    require_set(eval_args.out_dir, "out-dir");
    run_eval(eval_args);
  });

  // inspect
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "dump priors, codes or attention maps");
  inspect_cmd->require_subcommand(1);

  InspectPriorsArgs priors_args;
  CLI::App* priors_cmd = inspect_cmd->add_subcommand("priors");
  FileConfig priors_fc(priors_cmd);
  add_opt(priors_cmd, priors_fc, "b", priors_args.b);
  add_opt(priors_cmd, priors_fc, "k", priors_args.k);
  add_opt(priors_cmd, priors_fc, "sigma", priors_args.sigma);
  add_opt(priors_cmd, priors_fc, "transcript", priors_args.transcript);
  add_opt(priors_cmd, priors_fc, "out-dir", priors_args.out_dir, "OUT_DIR");
  priors_cmd->callback([&] {
    priors_fc.apply();
    require_set(priors_args.out_dir, "out-dir");
    run_inspect_priors(priors_args);
  });

  InspectModelArgs codes_args;
  CLI::App* codes_cmd = inspect_cmd->add_subcommand("codes");
  FileConfig codes_fc(codes_cmd);
  add_opt(codes_cmd, codes_fc, "data", codes_args.data_dir, "DATA");
  add_opt(codes_cmd, codes_fc, "checkpoint", codes_args.checkpoint);
  add_opt(codes_cmd, codes_fc, "video", codes_args.video);
  add_opt(codes_cmd, codes_fc, "out-dir", codes_args.out_dir, "OUT_DIR");
  codes_cmd->callback([&] {
    codes_fc.apply();
    require_set(codes_args.data_dir, "data");
    require_set(codes_args.checkpoint, "checkpoint");
    require_set(codes_args.out_dir, "out-dir");
    run_inspect_codes(codes_args);
  });

  InspectModelArgs attn_args;
  CLI::App* attn_cmd = inspect_cmd->add_subcommand("attention");
  FileConfig attn_fc(attn_cmd);
  add_opt(attn_cmd, attn_fc, "data", attn_args.data_dir, "DATA");
  add_opt(attn_cmd, attn_fc, "checkpoint", attn_args.checkpoint);
  add_opt(attn_cmd, attn_fc, "video", attn_args.video);
  add_opt(attn_cmd, attn_fc, "out-dir", attn_args.out_dir, "OUT_DIR");
  attn_cmd->callback([&] {
    attn_fc.apply();
    require_set(attn_args.data_dir, "data");
    require_set(attn_args.checkpoint, "checkpoint");
    require_set(attn_args.out_dir, "out-dir");
    run_inspect_attention(attn_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const config_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const io_error& e) {
    std::cerr << "error: missing-file: " << e.what() << "\n";
    return 2;
  } catch (const shape_error& e) {
    std::cerr << "error: shape: " << e.what() << "\n";
    return 3;
  } catch (const format_error& e) {
    std::cerr << "error: format: " << e.what() << "\n";
    return 4;
  } catch (const numeric_error& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
