// Command-line frontend: middle-frame interpolation, sequence upsampling,
// flow estimation/visualization, benchmarking and toy fine-tuning.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "midframe/bench_harness.hpp"
#include "midframe/dataset.hpp"
#include "midframe/flo_io.hpp"
#include "midframe/flow_color.hpp"
#include "midframe/image_io.hpp"
#include "midframe/parallel.hpp"
#include "midframe/pipeline.hpp"
#include "midframe/train.hpp"

namespace fs = std::filesystem;
using namespace midframe;

namespace {

struct CliState {
  std::string flow = "gf";
  GFParams gf;
  ShiTomasiParams st;
  LKParams lk;
  std::string fusion_mode = "blend";
  int base_channels = 16;
  int resblocks = 4;
  std::vector<float> timesteps;
  int repeat = 1;
  int threads = 0;
  std::uint64_t seed = 0;
  std::string weights;
  std::string flo01, flo10;
  bool verbose = false;

  std::unique_ptr<FusionModel> model;  // loaded lazily for learned mode

  PipelineOptions pipeline_options() {
    PipelineOptions opts;
    if (flow == "gf") opts.flow_method = FlowMethod::GF;
    else if (flow == "lk") opts.flow_method = FlowMethod::LK;
    else if (flow == "file") opts.flow_method = FlowMethod::File;
    else throw DataError("unknown flow method: " + flow);
    opts.gf = gf;
    opts.st = st;
    opts.lk = lk;
    opts.fusion.base_channels = base_channels;
    opts.fusion.resblocks_per_stage = resblocks;
    if (fusion_mode == "blend") {
      opts.fusion.mode = FusionConfig::Mode::Blend;
    } else if (fusion_mode == "learned") {
      opts.fusion.mode = FusionConfig::Mode::Learned;
      if (!model) {
        if (weights.empty()) throw DataError("learned fusion requires --weights");
        model = std::make_unique<FusionModel>(FusionModel::load_checkpoint(weights));
      }
      opts.model = model.get();
    } else {
      throw DataError("unknown fusion mode: " + fusion_mode);
    }
    return opts;
  }

  std::vector<float> resolved_timesteps() const {
    if (timesteps.empty()) return {0.5f};
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
      if (!(timesteps[i] > 0.0f && timesteps[i] < 1.0f))
        throw DataError("timesteps must lie strictly inside (0,1)");
      if (i > 0 && timesteps[i] <= timesteps[i - 1])
        throw DataError("timesteps must be strictly increasing");
    }
    return timesteps;
  }
};

void add_common_options(CLI::App& app, CliState& s) {
  app.add_option("--flow", s.flow, "flow estimator: gf | lk | file")
      ->check(CLI::IsMember({"gf", "lk", "file"}))
      ->capture_default_str();
  app.add_option("--gf.pyr_scale", s.gf.pyr_scale)->capture_default_str();
  app.add_option("--gf.levels", s.gf.levels)->capture_default_str();
  app.add_option("--gf.poly_n", s.gf.poly_n)->capture_default_str();
  app.add_option("--gf.win_size", s.gf.win_size)->capture_default_str();
  app.add_option("--gf.iterations", s.gf.iterations)->capture_default_str();
  app.add_option("--gf.poly_sigma", s.gf.poly_sigma)->capture_default_str();
  app.add_option("--st.max_corners", s.st.max_corners)->capture_default_str();
  app.add_option("--st.quality_level", s.st.quality_level)->capture_default_str();
  app.add_option("--st.min_distance", s.st.min_distance)->capture_default_str();
  app.add_option("--st.block_size", s.st.block_size)->capture_default_str();
  app.add_option("--lk.win_size", s.lk.win_size)->capture_default_str();
  app.add_option("--lk.levels", s.lk.levels)->capture_default_str();
  app.add_option("--lk.max_iterations", s.lk.max_iterations)->capture_default_str();
  app.add_option("--lk.epsilon", s.lk.epsilon)->capture_default_str();
  app.add_option("--lk.min_eig_threshold", s.lk.min_eig_threshold)->capture_default_str();
  app.add_option("--fusion.mode", s.fusion_mode, "blend | learned")
      ->check(CLI::IsMember({"blend", "learned"}))
      ->capture_default_str();
  app.add_option("--fusion.base_channels", s.base_channels)->capture_default_str();
  app.add_option("--fusion.resblocks_per_stage", s.resblocks)->capture_default_str();
  app.add_option("--t", s.timesteps, "timestep(s) in (0,1), repeatable");
  app.add_option("--repeat", s.repeat, "timed runs per sample (median reported)")
      ->capture_default_str();
  app.add_option("--threads", s.threads, "worker threads (0 = all logical cores)")
      ->capture_default_str();
  app.add_option("--seed", s.seed)->capture_default_str();
  app.add_option("--weights", s.weights, "FRWT checkpoint for learned fusion");
  app.add_option("--flo01", s.flo01, ".flo forward flow (flow method 'file')");
  app.add_option("--flo10", s.flo10, ".flo backward flow (flow method 'file')");
  app.add_flag("--verbose", s.verbose);
}

std::string timestep_suffix(float t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_t%.3f", double(t));
  return buf;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const fs::path p(path);
  fs::path out = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
  return out.string();
}

std::vector<TrainTriplet> load_train_triplets(const std::vector<TripletRecord>& records) {
  std::vector<TrainTriplet> out;
  for (const TripletRecord& rec : records) {
    TrainTriplet t;
    t.frame0 = load_image(rec.frame0);
    t.gt = load_image(rec.gt);
    t.frame1 = load_image(rec.frame1);
    const fs::path label = fs::path(rec.frame0).parent_path() / "flow_label.flo";
    if (fs::exists(label)) t.flow_label = read_flo(label.string());
    out.push_back(std::move(t));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"analytical-flow middle-frame interpolation toolkit"};
  app.set_config("--config", "", "config file, key=value (flags take precedence)");
  CliState s;
  add_common_options(app, s);
  app.require_subcommand(1);

  // interpolate
  std::string in0, in1, out_path;
  CLI::App* cmd_interp = app.add_subcommand("interpolate", "synthesize frame(s) between two images");
  cmd_interp->add_option("frame0", in0)->required();
  cmd_interp->add_option("frame1", in1)->required();
  cmd_interp->add_option("-o,--out", out_path, "output PNG path")->required()->configurable(false);
  cmd_interp->fallthrough();

  // sequence
  std::string seq_in, seq_out;
  int factor = 2;
  CLI::App* cmd_seq = app.add_subcommand("sequence", "upsample a frame directory by 2x or 4x");
  cmd_seq->add_option("in_dir", seq_in)->required();
  cmd_seq->add_option("out_dir", seq_out)->required();
  cmd_seq->add_option("--factor", factor)->check(CLI::IsMember({2, 4}))->capture_default_str();
  cmd_seq->fallthrough();

  // flow
  std::string flow_out;
  bool bidirectional = false;
  CLI::App* cmd_flow = app.add_subcommand("flow", "estimate flow, write .flo and color PNG");
  cmd_flow->add_option("frame0", in0)->required();
  cmd_flow->add_option("frame1", in1)->required();
  cmd_flow->add_option("-o,--out", flow_out, "output base path (gets .flo/.png)")
      ->required()
      ->configurable(false);
  cmd_flow->add_flag("--bidirectional", bidirectional, "also write the reverse flow");
  cmd_flow->fallthrough();

  // benchmark
  std::string bench_root, layout_name = "triplet-dirs", report_path = "report.csv";
  CLI::App* cmd_bench = app.add_subcommand("benchmark", "run the triplet benchmark");
  cmd_bench->add_option("root", bench_root)->required();
  cmd_bench->add_option("--layout", layout_name, "triplet-dirs | vimeo-list | middlebury-other")
      ->capture_default_str();
  cmd_bench->add_option("--report", report_path, "CSV output path")
      ->capture_default_str()
      ->configurable(false);
  cmd_bench->fallthrough();

  // train
  std::string train_root, ckpt_out = "fusion.frwt";
  int steps = 500;
  float lr = 1e-4f, weight_decay = 1e-4f;
  CLI::App* cmd_train = app.add_subcommand("train", "desk-scale fusion fine-tuning");
  cmd_train->add_option("root", train_root)->required();
  cmd_train->add_option("--layout", layout_name)->capture_default_str();
  cmd_train->add_option("--checkpoint-out", ckpt_out)
      ->capture_default_str()
      ->configurable(false);
  cmd_train->add_option("--steps", steps)->capture_default_str();
  cmd_train->add_option("--lr", lr)->capture_default_str();
  cmd_train->add_option("--weight-decay", weight_decay)->capture_default_str();
  cmd_train->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // stable usage-error code
  }
  set_threads(s.threads);
  const std::string echo = app.config_to_str(true, false);

  if (cmd_interp->parsed()) {
    const Image frame0 = load_image(in0);
    const Image frame1 = load_image(in1);
    DenseFlow file01, file10;
    PipelineOptions opts = s.pipeline_options();
    if (opts.flow_method == FlowMethod::File) {
      if (s.flo01.empty() || s.flo10.empty())
        throw DataError("flow method 'file' needs --flo01 and --flo10");
      file01 = read_flo(s.flo01);
      file10 = read_flo(s.flo10);
      opts.flow01 = &file01;
      opts.flow10 = &file10;
    }
    const std::vector<float> ts = s.resolved_timesteps();

    const auto t_start = std::chrono::steady_clock::now();
    auto [f01, f10] = estimate_bidirectional(frame0, frame1, opts);
    const auto t_flow = std::chrono::steady_clock::now();
    for (float t : ts) {
      const Image out = synthesize(frame0, frame1, f01, f10, Timestep(t), opts);
      const std::string path =
          ts.size() == 1 ? out_path : with_suffix(out_path, timestep_suffix(t));
      save_image(out, path);
      if (s.verbose) std::cout << "wrote " << path << "\n";
    }
    const auto t_end = std::chrono::steady_clock::now();
    const double flow_ms = std::chrono::duration<double, std::milli>(t_flow - t_start).count();
    const double total_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
    std::printf("flow: %.2f ms  total: %.2f ms\n", flow_ms, total_ms);
    return 0;
  }

  if (cmd_seq->parsed()) {
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(seq_in))
      if (e.is_regular_file()) inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
    if (inputs.size() < 2) throw DataError("sequence needs at least two input frames");

    std::vector<Image> frames;
    for (const fs::path& p : inputs) {
      Image img = load_image(p.string());
      if (!frames.empty() && !img.same_shape(frames.front()))
        throw DataError("mixed frame dimensions at " + p.string());
      frames.push_back(std::move(img));
    }

    PipelineOptions opts = s.pipeline_options();
    int passes = factor == 2 ? 1 : 2;
    for (int pass = 0; pass < passes; ++pass) {
      std::vector<Image> next;
      next.reserve(frames.size() * 2 - 1);
      for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        next.push_back(frames[i]);
        next.push_back(interpolate(frames[i], frames[i + 1], Timestep(0.5f), opts));
      }
      next.push_back(frames.back());
      frames = std::move(next);
    }

    fs::create_directories(seq_out);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%06zu.png", i);
      save_image(frames[i], (fs::path(seq_out) / name).string());
    }
    std::printf("wrote %zu frames to %s\n", frames.size(), seq_out.c_str());
    return 0;
  }

  if (cmd_flow->parsed()) {
    const Image frame0 = load_image(in0);
    const Image frame1 = load_image(in1);
    PipelineOptions opts = s.pipeline_options();
    if (opts.flow_method == FlowMethod::File)
      throw DataError("flow command needs an estimator (gf or lk)");
    auto [f01, f10] = estimate_bidirectional(frame0, frame1, opts);
    write_flo(f01, flow_out + ".flo");
    save_image(flow_to_color(f01), flow_out + ".png");
    if (bidirectional) {
      write_flo(f10, flow_out + "_rev.flo");
      save_image(flow_to_color(f10), flow_out + "_rev.png");
    }
    std::printf("wrote %s.flo / %s.png\n", flow_out.c_str(), flow_out.c_str());
    return 0;
  }

  if (cmd_bench->parsed()) {
    const DatasetLoadResult ds = load_dataset(bench_root, parse_layout(layout_name));
    for (const std::string& warning : ds.warnings)
      std::cerr << "warning: " << warning << "\n";
    if (ds.records.empty()) throw DataError("no triplets found under " + bench_root);
    DenseFlow file01, file10;
    PipelineOptions opts = s.pipeline_options();
    if (opts.flow_method == FlowMethod::File) {
      if (s.flo01.empty() || s.flo10.empty())
        throw DataError("flow method 'file' needs --flo01 and --flo10");
      file01 = read_flo(s.flo01);
      file10 = read_flo(s.flo10);
      opts.flow01 = &file01;
      opts.flow10 = &file10;
    }
    const BenchmarkReport report =
        run_benchmark(ds.records, opts, s.repeat, echo, s.verbose ? &std::cerr : nullptr);
    write_report_csv(report, report_path);
    std::cout << format_report_table(report);
    std::cout << "report written to " << report_path << "\n";
    return 0;
  }

  if (cmd_train->parsed()) {
    if (s.fusion_mode != "learned") {
      if (app.count("--fusion.mode") > 0) {
        std::cerr << "train requires --fusion.mode learned\n";
        return 1;
      }
      s.fusion_mode = "learned";
    }
    const DatasetLoadResult ds = load_dataset(train_root, parse_layout(layout_name));
    for (const std::string& warning : ds.warnings)
      std::cerr << "warning: " << warning << "\n";
    if (ds.records.empty()) throw DataError("no triplets found under " + train_root);
    const std::vector<TrainTriplet> triplets = load_train_triplets(ds.records);

    FusionConfig cfg;
    cfg.mode = FusionConfig::Mode::Learned;
    cfg.base_channels = s.base_channels;
    cfg.resblocks_per_stage = s.resblocks;
    FusionModel model(cfg, s.seed);

    // flows for training come from the analytical estimator, never the model
    s.fusion_mode = "blend";
    PipelineOptions flow_opts = s.pipeline_options();

    TrainHyperparams hp;
    hp.steps = steps;
    hp.lr = lr;
    hp.weight_decay = weight_decay;
    const TrainResult result = train_fusion(triplets, model, flow_opts, hp);

    model.save_checkpoint(ckpt_out, echo);
    write_loss_history_csv(result, ckpt_out + ".losses.csv");
    if (!result.history.empty())
      std::printf("steps: %zu  first l_rec: %.6f  final l_rec: %.6f\n",
                  result.history.size(), result.history.front().l_rec,
                  result.history.back().l_rec);
    std::printf("checkpoint written to %s\n", ckpt_out.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError&) {
    return 1;  // CLI11_PARSE already handled printing; defensive
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
