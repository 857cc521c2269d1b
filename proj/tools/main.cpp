#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "posergcn/gradcheck.hpp"
#include "posergcn/model.hpp"
#include "posergcn/trainer.hpp"

namespace fs = std::filesystem;
using namespace posergcn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitUsage = 2;

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128] = {0};
  std::string out;
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

void write_manifest(const fs::path& path, const RunConfig& cfg, const std::string& started,
                    const std::string& finished, const fs::path& checkpoint,
                    const fs::path& log_csv) {
  nlohmann::json j;
  j["config"] = cfg.canonical();
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["git"] = git_describe();
  j["started_at"] = started;
  if (!finished.empty()) j["finished_at"] = finished;
  j["outputs"] = {{"checkpoint", checkpoint.string()}, {"log", log_csv.string()}};
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthSpec spec;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  auto tracks = synth_tracks(args.spec);
  write_jsonl(args.out, tracks);
  std::cout << "wrote " << tracks.size() << " tracks (" << args.spec.n_ids << " ids x "
            << args.spec.tracks_per_id << " tracks x T=" << args.spec.frames << ") to " << args.out
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out_dir;
  std::string appearance_dir;
};

int run_train(const TrainArgs& args) {
  RunConfig cfg = RunConfig::parse_file(args.config);
  cfg.apply_env_seed_override();

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  const fs::path checkpoint_path = out_dir / "checkpoint.bin";
  const fs::path log_path = out_dir / "train_log.csv";
  const fs::path manifest_path = out_dir / "manifest.json";

  std::optional<fs::path> app_dir;
  if (!args.appearance_dir.empty()) app_dir = fs::path(args.appearance_dir);
  PreparedDataset data = prepare_dataset(args.data, cfg.T, app_dir);
  if (data.feature_dim != cfg.d)
    throw DimensionError("config d=" + std::to_string(cfg.d) + " but dataset features are " +
                         std::to_string(data.feature_dim) + "-dimensional");

  const std::string started = timestamp_utc();
  write_manifest(manifest_path, cfg, started, "", checkpoint_path, log_path);

  std::cout << "run " << cfg.hash() << ": cell=" << to_string(cfg.cell)
            << " pooling=" << to_string(cfg.pooling) << " aggregator=" << to_string(cfg.aggregator)
            << " n=" << cfg.n << " d=" << cfg.d << " T=" << cfg.T << " margin=" << cfg.margin
            << " lambda=" << to_string(cfg.lambda_mode) << " epochs=" << cfg.epochs
            << " seed=" << cfg.seed << "\n";

  Model model(cfg, data.classes, data.feature_dim);
  Trainer trainer(model, data);
  std::ofstream log(log_path);
  if (!log) throw ArgumentError("cannot write training log: " + log_path.string());
  auto history = trainer.run(log);

  std::vector<std::pair<std::string, const Param*>> entries;
  for (auto& [name, p] : model.named_params()) entries.emplace_back(name, p);
  save_checkpoint(checkpoint_path, cfg.canonical(), entries);

  write_manifest(manifest_path, cfg, started, timestamp_utc(), checkpoint_path, log_path);
  std::cout << "trained " << history.size() << " epochs; final total loss "
            << history.back().loss.total << "; checkpoint " << checkpoint_path << "\n";
  if (trainer.skipped_anchors() > 0)
    std::cout << "warning: " << trainer.skipped_anchors() << " anchors had no positive\n";
  if (trainer.replacement_draws() > 0)
    std::cout << "warning: " << trainer.replacement_draws()
              << " tracks drawn with replacement (identities below K tracks)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string branch = "fused";
  std::string out;
  std::string appearance_dir;
  bool l2norm = false;
};

int run_eval(const EvalArgs& args) {
  Checkpoint ck = load_checkpoint(args.checkpoint);
  RunConfig cfg = RunConfig::parse_text(ck.config_text);
  const Matrix* head_bias = ck.find("head/bias");
  if (!head_bias) throw ArgumentError("checkpoint: missing head/bias entry");
  const int classes = head_bias->cols();

  std::optional<fs::path> app_dir;
  if (!args.appearance_dir.empty()) app_dir = fs::path(args.appearance_dir);
  PreparedDataset data = prepare_dataset(args.data, cfg.T, app_dir);

  Model model(cfg, classes, cfg.d);
  model.load(ck);
  if (data.feature_dim != cfg.d)
    throw DimensionError("checkpoint expects d=" + std::to_string(cfg.d) +
                         " but dataset features are " + std::to_string(data.feature_dim) +
                         "-dimensional");

  const Branch branch = branch_from_string(args.branch);
  EmbeddingTable table = embed_tracks(model, data);
  RetrievalMetrics metrics = evaluate_retrieval(retrieval_set(table, data, branch, args.l2norm));

  const std::string run_id = cfg.hash().substr(0, 12) + "-" + to_string(branch);
  char row[256];
  std::snprintf(row, sizeof(row), "%s,%s,%.10g,%.10g,%.10g,%.10g\n", run_id.c_str(),
                cfg.hash().c_str(), metrics.map, metrics.curve.rank1, metrics.curve.rank5,
                metrics.curve.rank20);

  if (!args.out.empty()) {
    const bool fresh = !fs::exists(args.out) || fs::file_size(args.out) == 0;
    std::ofstream out(args.out, std::ios::app);
    if (!out) throw ArgumentError("cannot write metrics: " + args.out);
    if (fresh) out << "run_id,config_hash,mAP,rank1,rank5,rank20\n";
    out << row;
  }
  std::cout << "run_id,config_hash,mAP,rank1,rank5,rank20\n" << row;
  if (metrics.skipped_queries > 0)
    std::cout << "warning: " << metrics.skipped_queries
              << " queries had no relevant gallery item\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  // Central-difference roundoff scales as 1/h and relu-kink crossings as h;
  // 3e-5 keeps both regimes well under the 1e-4 tolerance for this grid.
  double step = 3e-5;
  bool inject_fault = false;
};

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

TemporalPoseGraph random_pose_graph(int frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::vector<PoseFrame> fs;
  for (int t = 0; t < frames; ++t) {
    PoseFrame f;
    for (int i = 0; i < kKeypoints; ++i) {
      f.coords(i, 0) = coord(rng);
      f.coords(i, 1) = coord(rng);
      f.visible[static_cast<size_t>(i)] = true;
    }
    fs.push_back(f);
  }
  return build_temporal_graph(std::move(fs));
}

int run_gradcheck(const GradcheckArgs& args) {
  debug::inject_backward_fault(args.inject_fault);

  const int n = 3;
  const int T = 3;
  const int d = 4;
  const int tracks = 4;  // 2 identities x 2 tracks
  const std::vector<int> labels{0, 0, 1, 1};
  const double margin = 0.3;

  std::mt19937_64 data_rng(20240101);
  std::vector<TemporalPoseGraph> graphs;
  std::vector<Matrix> appearance;
  for (int i = 0; i < tracks; ++i) {
    graphs.push_back(random_pose_graph(T, data_rng));
    appearance.push_back(random_matrix(T, d, data_rng));
  }

  struct CellSpec {
    std::string name;
    CellKind kind;
    int layers;
  };
  const std::vector<CellSpec> cell_specs{
      {"rgcn_l1", CellKind::rgcn, 1},    {"rgcn_l2", CellKind::rgcn, 2},
      {"rgcn_l3", CellKind::rgcn, 3},    {"lgcn", CellKind::lgcn, 1},
      {"gcn_rnn", CellKind::gcn_rnn, 1}, {"gcn_lstm", CellKind::gcn_lstm, 1},
  };
  const std::vector<Pooling> poolings{Pooling::dam, Pooling::tam, Pooling::nam, Pooling::mean};
  const std::vector<std::string> losses{"triplet", "identity", "combined"};

  struct PipelineResult {
    std::string name;
    double worst;
  };
  std::vector<PipelineResult> report;
  double overall = 0.0;
  std::mt19937_64 param_rng(7);
  for (const auto& spec : cell_specs) {
    for (Pooling pooling : poolings) {
      CellParams cell = make_cell(spec.kind, n, spec.layers, param_rng);
      AttentionParams attention = AttentionParams::init(n, param_rng);
      AaParams aggregator = AaParams::init(d, param_rng);
      ClassifierHead head = ClassifierHead::init(d + 2 * n, 2, param_rng);

      std::vector<Param*> params;
      visit_params(cell, [&](const std::string&, Param& p) { params.push_back(&p); });
      attention.visit([&](const std::string&, Param& p) { params.push_back(&p); });
      aggregator.visit([&](const std::string&, Param& p) { params.push_back(&p); });
      head.visit([&](const std::string&, Param& p) { params.push_back(&p); });

      auto branch_features = [&](Tape& tape, std::vector<Var>& f_a, std::vector<Var>& f_p,
                                 std::vector<Var>& fused) {
        for (int i = 0; i < tracks; ++i) {
          auto states = unroll(cell, graphs[static_cast<size_t>(i)], tape);
          auto hs = hidden_states(states);
          Var p = pool(pooling, hs, attention);
          Var a = aa(tape.constant(appearance[static_cast<size_t>(i)]), aggregator);
          f_p.push_back(p);
          f_a.push_back(a);
          fused.push_back(concat_cols(a, p));
        }
      };

      for (const std::string& loss_kind : losses) {
        LossBuilder build;
        if (loss_kind == "triplet") {
          build = [&](Tape& tape) {
            std::vector<Var> f_a, f_p, fused;
            branch_features(tape, f_a, f_p, fused);
            return triplet_batch_hard(f_p, labels, margin);
          };
        } else if (loss_kind == "identity") {
          build = [&](Tape& tape) {
            std::vector<Var> f_a, f_p, fused;
            branch_features(tape, f_a, f_p, fused);
            return identity_loss(head, fused, labels);
          };
        } else {
          // Lambda is detached per step; the checked function holds it at
          // its base-point value, exactly like a training step.
          double lambda0;
          {
            Tape tape;
            std::vector<Var> f_a, f_p, fused;
            branch_features(tape, f_a, f_p, fused);
            lambda0 = total_loss(f_a, f_p, fused, labels, head, margin, LambdaMode{true, 0.5})
                          .report.lambda;
          }
          build = [&, lambda0](Tape& tape) {
            std::vector<Var> f_a, f_p, fused;
            branch_features(tape, f_a, f_p, fused);
            return total_loss(f_a, f_p, fused, labels, head, margin, LambdaMode{false, lambda0})
                .total;
          };
        }
        const double worst = finite_diff_check(build, params, args.step);
        report.push_back({spec.name + "/" + to_string(pooling) + "/" + loss_kind, worst});
        overall = std::max(overall, worst);
      }
    }
  }
  debug::inject_backward_fault(false);

  std::printf("%-32s %s\n", "pipeline", "max_rel_err");
  for (const auto& p : report) std::printf("%-32s %.3e\n", p.name.c_str(), p.worst);
  std::printf("worst over %zu pipelines: %.3e (tolerance 1e-4)\n", report.size(), overall);
  if (overall <= 1e-4) {
    std::printf("gradcheck PASS\n");
    return kExitOk;
  }
  std::printf("gradcheck FAIL\n");
  return kExitVerificationFailure;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  int n = 64;
  int frames = 10;
  int reps = 10000;
  uint64_t seed = 42;
};

int run_bench(const BenchArgs& args) {
  std::mt19937_64 rng(args.seed);
  TemporalPoseGraph graph = random_pose_graph(args.frames, rng);
  std::printf("%-10s %12s %12s\n", "cell", "median_us", "params");
  struct Row {
    std::string name;
    double median;
    int params;
  };
  std::vector<Row> rows;
  for (CellKind kind : {CellKind::rgcn, CellKind::lgcn, CellKind::gcn_rnn, CellKind::gcn_lstm}) {
    CellParams cell = make_cell(kind, args.n, 1, rng);
    const double median = median_unroll_micros(cell, graph, args.reps);
    rows.push_back({to_string(kind), median, param_count(cell)});
    std::printf("%-10s %12.1f %12d\n", to_string(kind).c_str(), median, param_count(cell));
  }
  const auto& rgcn = rows[0];
  const auto& gcn_rnn = rows[2];
  std::printf("rgcn vs gcn_rnn: time %.1fus vs %.1fus, params %d vs %d\n", rgcn.median,
              gcn_rnn.median, rgcn.params, gcn_rnn.params);
  return kExitOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  std::string checkpoint;
  std::string data;
  std::string track;
  std::string appearance_dir;
};

int run_inspect(const InspectArgs& args) {
  Checkpoint ck = load_checkpoint(args.checkpoint);
  RunConfig cfg = RunConfig::parse_text(ck.config_text);
  const Matrix* head_bias = ck.find("head/bias");
  if (!head_bias) throw ArgumentError("checkpoint: missing head/bias entry");
  Model model(cfg, head_bias->cols(), cfg.d);
  model.load(ck);

  std::optional<fs::path> app_dir;
  if (!args.appearance_dir.empty()) app_dir = fs::path(args.appearance_dir);
  PreparedDataset data = prepare_dataset(args.data, cfg.T, app_dir);
  const PreparedTrack* track = nullptr;
  for (const auto& t : data.tracks)
    if (t.track_id == args.track) track = &t;
  if (!track) throw ArgumentError("track not found in dataset: " + args.track);

  Tape tape;
  auto states = unroll(model.cell(), track->graph, tape);
  auto hs = hidden_states(states);
  AttentionPooled node = node_attention(hs, model.attention());
  AttentionPooled time = time_attention(hs, model.attention());

  std::printf("track %s (identity %d, camera %d, T=%d)\n", track->track_id.c_str(),
              track->identity, track->camera, track->graph.length());
  std::printf("%-6s %-12s %s\n", "frame", "a_t", "occluded_keypoints");
  double time_sum = 0.0;
  for (int t = 0; t < track->graph.length(); ++t) {
    int occluded = 0;
    for (bool v : track->graph.frames[static_cast<size_t>(t)].visible)
      if (!v) ++occluded;
    const double w = time.weights.value()(t, 0);
    time_sum += w;
    std::printf("%-6d %-12.6f %d%s\n", t + 1, w, occluded, occluded > 0 ? "  [occluded]" : "");
  }
  std::printf("%-6s %-12.6f\n", "sum", time_sum);

  std::printf("%-6s %-12s %s\n", "node", "a_j", "occluded_in_frames");
  double node_sum = 0.0;
  for (int j = 0; j < kKeypoints; ++j) {
    int occluded = 0;
    for (const auto& frame : track->graph.frames)
      if (!frame.visible[static_cast<size_t>(j)]) ++occluded;
    const double w = node.weights.value()(j, 0);
    node_sum += w;
    std::printf("%-6d %-12.6f %d%s\n", j + 1, w, occluded, occluded > 0 ? "  [occluded]" : "");
  }
  std::printf("%-6s %-12.6f\n", "sum", node_sum);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose-aided video person re-identification workbench"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  synth_args.spec.appearance_ambiguity = 0.5;
  auto* synth = app.add_subcommand("synth", "generate a synthetic gait dataset (JSONL)");
  synth->add_option("--ids", synth_args.spec.n_ids, "number of identities")->capture_default_str();
  synth->add_option("--tracks", synth_args.spec.tracks_per_id, "tracks per identity")
      ->capture_default_str();
  synth->add_option("--frames", synth_args.spec.frames, "frames per track")->capture_default_str();
  synth->add_option("--occlusion", synth_args.spec.occlusion_rate, "per-keypoint occlusion rate")
      ->capture_default_str();
  synth->add_option("--ambiguity", synth_args.spec.appearance_ambiguity,
                    "appearance ambiguity: 0 distinct centroids, 1 shared")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed, "generator seed")->capture_default_str();
  synth->add_option("--dim", synth_args.spec.feature_dim, "appearance feature dimension")
      ->capture_default_str();
  synth->add_option("--cameras", synth_args.spec.cameras, "number of cameras")
      ->capture_default_str();
  synth->add_option("--out", synth_args.out, "output JSONL path")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a two-branch model");
  train->add_option("--config", train_args.config, "config file (key = value)")->required();
  train->add_option("--data", train_args.data, "training dataset (JSONL)")->required();
  train->add_option("--out-dir", train_args.out_dir, "output directory")->required();
  train->add_option("--appearance-dir", train_args.appearance_dir,
                    "directory of <track_id>.apft files when features are not embedded");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "retrieval metrics for a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval->add_option("--data", eval_args.data, "evaluation dataset (JSONL)")->required();
  eval->add_option("--branch", eval_args.branch, "appearance | pose | fused")
      ->capture_default_str();
  eval->add_option("--out", eval_args.out, "metrics CSV to append to");
  eval->add_option("--appearance-dir", eval_args.appearance_dir,
                   "directory of <track_id>.apft files when features are not embedded");
  eval->add_flag("--l2norm", eval_args.l2norm, "L2-normalize embeddings before ranking");

  GradcheckArgs grad_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every pipeline");
  gradcheck->add_option("--step", grad_args.step, "central-difference step")
      ->capture_default_str();
  gradcheck->add_flag("--inject-fault", grad_args.inject_fault,
                      "corrupt one backward rule (harness self-test; must then FAIL)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "time cell unrolls and report parameter counts");
  bench->add_option("--n", bench_args.n, "hidden size")->capture_default_str();
  bench->add_option("--frames", bench_args.frames, "sequence length")->capture_default_str();
  bench->add_option("--reps", bench_args.reps, "repetitions per cell")->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "data seed")->capture_default_str();

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand("inspect", "dump attention scores for one track");
  inspect->add_option("--checkpoint", inspect_args.checkpoint, "checkpoint file")->required();
  inspect->add_option("--data", inspect_args.data, "dataset (JSONL)")->required();
  inspect->add_option("--track", inspect_args.track, "track id")->required();
  inspect->add_option("--appearance-dir", inspect_args.appearance_dir,
                      "directory of <track_id>.apft files when features are not embedded");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(synth)) return run_synth(synth_args);
    if (app.got_subcommand(train)) return run_train(train_args);
    if (app.got_subcommand(eval)) return run_eval(eval_args);
    if (app.got_subcommand(gradcheck)) return run_gradcheck(grad_args);
    if (app.got_subcommand(bench)) return run_bench(bench_args);
    if (app.got_subcommand(inspect)) return run_inspect(inspect_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kExitVerificationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  }
  return kExitUsage;
}
