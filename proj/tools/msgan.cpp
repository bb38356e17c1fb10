// SPDX-License-Identifier: Apache-2.0
//
// msgan: command line front end for pre-training, fine-tuning, inversion,
// stylization, exploration, evaluation and benchmarking.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "msgan/msgan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
  std::vector<std::string> argv;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Collects what a command read and wrote, then writes manifest.json and
// resolved_config.json into the output directory.
class Run {
 public:
  Run(const Globals& g, std::string command) : globals_(g), command_(std::move(command)), started_(utc_now()) {
    config_ = g.config_path.empty() ? msgan::RunConfig{} : msgan::load_run_config(g.config_path);
    if (g.seed) config_.apply_seed(*g.seed);
    config_.validate();
    if (!g.out.empty()) {
      out_ = g.out;
    } else if (!config_.output_dir.empty()) {
      out_ = config_.output_dir;
    } else if (const char* env = std::getenv("MSGAN_OUT")) {
      out_ = fs::path(env) / command_;
    } else {
      out_ = fs::path("runs") / command_;
    }
    fs::create_directories(out_);
    if (!g.config_path.empty()) input(g.config_path);
  }

  const msgan::RunConfig& config() const { return config_; }
  msgan::RunConfig& config() { return config_; }
  const fs::path& out() const { return out_; }

  void input(const fs::path& p) { inputs_[p.string()] = msgan::file_sha256(p); }
  void output(const fs::path& p) { outputs_[p.string()] = msgan::file_sha256(p); }
  void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }
  void base_hash(std::string h) { base_hash_ = std::move(h); }
  json& extra() { return extra_; }

  void finish() {
    const auto resolved = out_ / "resolved_config.json";
    {
      std::ofstream f(resolved);
      f << resolved_json(config_).dump(2) << '\n';
      if (!f) throw msgan::IoError("cannot write " + resolved.string());
    }
    json m;
    m["command"] = command_;
    m["argv"] = globals_.argv;
    m["version"] = msgan::kVersion;
    m["deterministic"] = globals_.deterministic;
    m["seed"] = config_.seed;
    m["seeds"] = seeds_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!base_hash_.empty()) m["base_hash"] = base_hash_;
    m["started"] = started_;
    m["finished"] = utc_now();
    if (!extra_.is_null()) m["details"] = extra_;
    const auto path = out_ / "manifest.json";
    std::ofstream f(path);
    f << m.dump(2) << '\n';
    if (!f) throw msgan::IoError("cannot write " + path.string());
  }

 private:
  const Globals& globals_;
  std::string command_;
  std::string started_;
  msgan::RunConfig config_;
  fs::path out_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, std::uint64_t> seeds_;
  std::string base_hash_;
  json extra_;
};

msgan::BaseModel load_base_checked(Run& run, const fs::path& path) {
  run.input(path);
  msgan::BaseModel base = msgan::load_base(path);
  if (base.config != run.config().base_config())
    throw msgan::ConfigError("base checkpoint does not match preset '" + run.config().preset + "'");
  run.base_hash(msgan::base_model_hash(base));
  return base;
}

msgan::MultiStyleModel load_model_checked(Run& run, const fs::path& path, const msgan::BaseModel& base) {
  run.input(path);
  msgan::MultiStyleModel model = msgan::load_model(path);
  if (model.base_hash != msgan::base_model_hash(base))
    throw msgan::IntegrityError("model was trained from a different base (" + model.base_hash + ")");
  return model;
}

std::vector<msgan::NamedImage> read_references(Run& run, const fs::path& dir) {
  std::vector<msgan::NamedImage> refs;
  for (const auto& p : msgan::list_pngs(dir)) {
    run.input(p);
    refs.push_back({p.stem().string(), msgan::read_png(p)});
  }
  if (refs.empty()) throw msgan::IoError("no PNG files in " + dir.string());
  return refs;
}

msgan::Image read_input(Run& run, const fs::path& p) {
  run.input(p);
  return msgan::read_png(p);
}

void write_image(Run& run, const fs::path& p, const msgan::Image& img) {
  msgan::write_png(p, img);
  run.output(p);
}

void write_text(Run& run, const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
  if (!f) throw msgan::IoError("cannot write " + p.string());
  f.close();
  run.output(p);
}

// ---------------------------------------------------------------- pretrain

void cmd_pretrain(const Globals& g) {
  Run run(g, "pretrain");
  const auto& cfg = run.config();
  auto dataset_spec = cfg.dataset;
  dataset_spec.resolution = cfg.base_config().generator.resolution();
  std::cerr << "rendering " << dataset_spec.count << " images\n";
  const auto dataset = msgan::render_dataset(dataset_spec);
  const auto init = msgan::BaseModel::create(cfg.base_config(), msgan::derive_seed({cfg.seed, 0xba5e}));
  run.seed("dataset", dataset_spec.seed);
  run.seed("pretrain", cfg.pretrain.seed);

  const auto log_path = run.out() / "pretrain.tsv";
  std::ofstream log(log_path);
  log << "# step\td_loss\tg_loss\tpenalty\tfeature_gap\n";
  auto result = msgan::pretrain_gan(init, dataset, cfg.pretrain, [&](const msgan::PretrainRecord& r) {
    log << r.step << '\t' << r.d_loss << '\t' << r.g_loss << '\t' << r.penalty << '\t' << r.feature_gap << '\n';
    log.flush();
    std::cerr << "step " << r.step << " d " << r.d_loss << " g " << r.g_loss << " gap " << r.feature_gap << '\n';
  });
  log.close();
  run.output(log_path);

  const auto ckpt = run.out() / "base.msgan";
  msgan::save_base(result.model, ckpt);
  run.output(ckpt);
  run.base_hash(msgan::file_sha256(ckpt));

  const auto samples = msgan::base_samples(result.model, 16, msgan::derive_seed({cfg.seed, 0x5a}));
  write_image(run, run.out() / "samples.png", msgan::compose_grid(samples, 4));
  std::vector<msgan::Image> real(dataset.begin(), dataset.begin() + std::min<std::size_t>(16, dataset.size()));
  write_image(run, run.out() / "dataset.png", msgan::compose_grid(real, 4));

  run.extra() = json{{"initial_gap", result.initial_gap}, {"final_gap", result.final_gap}};
  run.finish();
  std::cout << "base\t" << ckpt.string() << "\nfeature_gap\t" << result.initial_gap << " -> " << result.final_gap
            << '\n';
}

// ---------------------------------------------------------------- train

void cmd_train(const Globals& g, const std::string& base_path, const std::string& refs_dir, int synthetic) {
  Run run(g, "train");
  const auto& cfg = run.config();
  const auto base = load_base_checked(run, base_path);

  std::vector<msgan::NamedImage> refs;
  if (synthetic > 0) {
    const auto dir = run.out() / "refs";
    fs::create_directories(dir);
    const std::uint64_t s = msgan::derive_seed({cfg.seed, 0x5f});
    run.seed("synthetic_refs", s);
    for (auto& r : msgan::synthetic_references(base, synthetic, s)) {
      write_image(run, dir / (r.name + ".png"), r.image);
      refs.push_back(std::move(r));
    }
  } else {
    if (refs_dir.empty()) throw msgan::ConfigError("train needs --refs DIR or --synthetic N");
    refs = read_references(run, refs_dir);
  }
  run.seed("train", cfg.train.seed);

  msgan::FinetuneOptions opts;
  opts.metrics_log = run.out() / "metrics.tsv";
  if (cfg.train.snapshot_every > 0) opts.snapshot_dir = run.out() / "snapshots";
  opts.on_step = [&](const msgan::StepRecord& r) {
    if (r.step % 50 == 0 || r.step + 1 == cfg.train.iterations)
      std::cerr << "step " << r.step << " loss " << r.terms.total << '\n';
  };
  auto result = msgan::finetune_detailed(refs, cfg.train, base, opts);
  run.output(opts.metrics_log);

  const auto ckpt = run.out() / "model.msgan";
  msgan::save_model(result.model, ckpt);
  run.output(ckpt);

  std::vector<msgan::Image> tiles;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    tiles.push_back(refs[k].image);
    tiles.push_back(base.generator.synthesize(result.reference_codes[k]));
    tiles.push_back(result.model.render(result.reference_codes[k], k));
  }
  write_image(run, run.out() / "references.png", msgan::compose_grid(tiles, 3));

  run.extra() = json{{"styles", result.model.names()},
                 {"train_seconds", result.train_seconds},
                 {"prepare_seconds", result.prepare_seconds}};
  run.finish();
  std::cout << "model\t" << ckpt.string() << "\nstyles\t" << refs.size() << "\ntrain_seconds\t"
            << result.train_seconds << '\n';
}

// ---------------------------------------------------------------- invert

void cmd_invert(const Globals& g, const std::string& base_path, const std::string& input) {
  Run run(g, "invert");
  const auto& cfg = run.config();
  const auto base = load_base_checked(run, base_path);
  const auto target = read_input(run, input);
  const std::uint64_t s = msgan::derive_seed({cfg.seed, 0x1b});
  run.seed("inversion", s);
  const auto r = msgan::invert_detailed(base, target, cfg.inversion, s);

  msgan::Archive ar;
  ar.metadata() = {{"kind", "code"},
                   {"schedule", r.code.schedule().widths()},
                   {"base_hash", msgan::base_model_hash(base)},
                   {"final_mse", r.final_mse}};
  for (std::size_t i = 0; i < r.code.rows(); ++i) {
    const auto& row = r.code.row(i);
    ar.add("code/row" + std::to_string(i), {row.size()}, std::vector<double>(row.data(), row.data() + row.size()),
           msgan::DType::F64);
  }
  const auto code_path = run.out() / "code.msgan";
  ar.write(code_path);
  run.output(code_path);
  const msgan::Image recon = base.generator.synthesize(r.code);
  const std::vector<msgan::Image> pair{target, recon};
  write_image(run, run.out() / "reconstruction.png", msgan::compose_grid(pair, 2));
  run.extra() = json{{"initial_mse", r.initial_mse}, {"final_mse", r.final_mse}, {"best_step", r.best_step}};
  run.finish();
  std::cout << "code\t" << code_path.string() << "\nmse\t" << r.initial_mse << " -> " << r.final_mse << '\n';
}

// ---------------------------------------------------------------- stylize

void cmd_stylize(const Globals& g, const std::string& model_path, const std::string& base_path,
                 const std::string& input, const std::string& styles, const std::string& grid) {
  Run run(g, "stylize");
  const auto& cfg = run.config();
  const auto base = load_base_checked(run, base_path);
  const auto model = load_model_checked(run, model_path, base);

  msgan::StylizationRequest req;
  req.input = read_input(run, input);
  if (styles != "all") req.styles = split_list(styles);
  req.inversion = cfg.inversion;
  req.seed = msgan::derive_seed({cfg.seed, 0x57});
  run.seed("inversion", req.seed);
  const auto outputs = msgan::stylize(model, base, req);

  std::vector<msgan::Image> tiles{req.input};
  for (const auto& o : outputs) {
    write_image(run, run.out() / (o.name + ".png"), o.image);
    tiles.push_back(o.image);
  }
  const fs::path grid_path = grid.empty() ? run.out() / "grid.png" : fs::path(grid);
  write_image(run, grid_path, msgan::compose_grid(tiles, static_cast<int>(tiles.size())));
  run.finish();
  std::cout << "grid\t" << grid_path.string() << "\nstyles\t" << outputs.size() << '\n';
}

// ---------------------------------------------------------------- explore

void cmd_explore(const Globals& g, const std::string& model_path, const std::string& base_path,
                 const std::string& mode, int count, const std::string& styles, const std::string& input) {
  Run run(g, "explore");
  const auto& cfg = run.config();
  const auto base = load_base_checked(run, base_path);
  const auto model = load_model_checked(run, model_path, base);
  std::vector<msgan::Image> tiles;

  if (mode == "sample") {
    const auto seed = cfg.seed;
    run.seed("sample", seed);
    const auto samples = msgan::sample_multistyle(model, base, seed, count);
    std::ofstream idx(run.out() / "samples.tsv");
    idx << "index\tstyle\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
      idx << i << '\t' << model.names()[samples[i].style] << '\n';
      tiles.push_back(samples[i].image);
    }
    idx.close();
    run.output(run.out() / "samples.tsv");
  } else if (mode == "mix") {
    const auto names = split_list(styles);
    if (names.size() != 2) throw msgan::ConfigError("--styles must name two styles for mix mode");
    msgan::SCode source;
    if (!input.empty()) {
      const std::uint64_t s = msgan::derive_seed({cfg.seed, 0x1b});
      run.seed("inversion", s);
      source = msgan::invert(base, read_input(run, input), cfg.inversion, s);
    } else {
      const std::uint64_t s = msgan::derive_seed({cfg.seed, 0x2a});
      run.seed("source", s);
      source = base.random_style(msgan::gaussian_vector(s, base.z_dim()));
    }
    auto spec = msgan::NovelMixSpec::tail(source, names[0], names[1]);
    const auto idx = msgan::select_styles(model, names);
    tiles.push_back(model.render(source, idx[0]));
    tiles.push_back(msgan::novel_mix(model, base, spec));
    tiles.push_back(model.render(source, idx[1]));
    write_image(run, run.out() / "mix.png", tiles[1]);
  } else {
    throw msgan::ConfigError("unknown explore mode '" + mode + "'");
  }
  const int cols = mode == "mix" ? 3 : std::min<int>(8, static_cast<int>(tiles.size()));
  write_image(run, run.out() / "explore.png", msgan::compose_grid(tiles, cols));
  run.finish();
  std::cout << "grid\t" << (run.out() / "explore.png").string() << '\n';
}

// ---------------------------------------------------------------- eval

void cmd_eval(const Globals& g, const std::string& model_path, const std::string& base_path,
              const std::string& refs_dir, const std::string& inputs_dir, bool compare_identity) {
  Run run(g, "eval");
  const auto& cfg = run.config();
  const auto base = load_base_checked(run, base_path);
  const auto model = load_model_checked(run, model_path, base);
  const auto refs = read_references(run, refs_dir);

  std::vector<msgan::Image> inputs;
  if (!inputs_dir.empty()) {
    for (const auto& p : msgan::list_pngs(inputs_dir)) inputs.push_back(read_input(run, p));
  } else {
    run.seed("inputs", cfg.eval.input_seed);
    inputs = msgan::base_samples(base, cfg.eval.inputs, cfg.eval.input_seed);
  }
  if (inputs.empty()) throw msgan::IoError("no evaluation inputs");

  const std::uint64_t s = msgan::derive_seed({cfg.seed, 0xe7});
  run.seed("inversion", s);
  const auto r = msgan::eval_model(model, base, inputs, refs, cfg.inversion, s, model.names());
  write_text(run, run.out() / "scores.tsv", msgan::format_eval(r));

  std::ostringstream summary;
  summary << std::fixed << std::setprecision(4);
  summary << "SIFID (lower is better), " << inputs.size() << " inputs\n\n";
  summary << std::left << std::setw(24) << "style" << std::right << std::setw(12) << "model";
  std::optional<msgan::EvalResult> ident;
  if (compare_identity) {
    const auto untrained = msgan::MultiStyleModel::untrained(base, model.names());
    ident = msgan::eval_model(untrained, base, inputs, refs, cfg.inversion, s, model.names());
    summary << std::setw(12) << "identity";
  }
  summary << '\n';
  for (std::size_t k = 0; k < r.styles.size(); ++k) {
    summary << std::left << std::setw(24) << r.styles[k] << std::right << std::setw(12) << r.per_style[k];
    if (ident) summary << std::setw(12) << ident->per_style[k];
    summary << '\n';
  }
  summary << std::left << std::setw(24) << "mean" << std::right << std::setw(12) << r.mean;
  if (ident) summary << std::setw(12) << ident->mean;
  summary << '\n';
  write_text(run, run.out() / "summary.txt", summary.str());
  run.extra() = json{{"mean", r.mean}};
  run.finish();
  std::cout << summary.str();
}

// ---------------------------------------------------------------- bench

void cmd_bench(const Globals& g, const std::string& base_path, std::vector<int> ns, int iterations) {
  Run run(g, "bench");
  auto& cfg = run.config();
  if (ns.empty()) ns = cfg.bench.styles;
  if (iterations > 0) cfg.bench.iterations = iterations;
  const auto base = load_base_checked(run, base_path);

  const int max_n = *std::max_element(ns.begin(), ns.end());
  if (max_n < 1) throw msgan::ConfigError("--N values must be positive");
  const std::uint64_t s = msgan::derive_seed({cfg.seed, 0x5f});
  run.seed("synthetic_refs", s);
  const auto refs = msgan::synthetic_references(base, max_n, s);
  std::vector<msgan::Image> targets;
  for (const auto& r : refs) targets.push_back(r.image);
  const std::uint64_t inv_seed = msgan::derive_seed({cfg.seed, 0x1a7});
  run.seed("inversion", inv_seed);
  std::cerr << "inverting " << max_n << " references\n";
  std::vector<msgan::SCode> codes;
  for (auto& r : msgan::invert_batch(base, targets, cfg.train.inversion, inv_seed)) codes.push_back(std::move(r.code));

  auto train = cfg.train;
  train.iterations = cfg.bench.iterations;
  train.snapshot_every = 0;

  std::ostringstream timing;
  std::ostringstream storage;
  bool header = false;
  json details = json::array();
  for (int n : ns) {
    std::cerr << "bench N=" << n << '\n';
    const auto dir = run.out() / ("N" + std::to_string(n));
    const auto r = msgan::bench_scaling(base, std::span(refs).first(n), std::span(codes).first(n), train, dir);
    auto text = msgan::format_scaling(r);
    if (header) text = text.substr(text.find('\n') + 1);
    header = true;
    timing << text;
    storage << "# N=" << n << '\n' << msgan::format_storage(r.storage) << '\n';
    details.push_back({{"N", n},
                       {"multistyle_seconds", r.timing.multistyle_seconds},
                       {"single_total_seconds", r.timing.single_total()},
                       {"multistyle_bytes", r.storage.file_bytes},
                       {"single_bytes", r.single_checkpoint_bytes}});
  }
  write_text(run, run.out() / "timing.tsv", timing.str());
  write_text(run, run.out() / "storage.txt", storage.str());
  run.extra() = details;
  run.finish();
  std::cout << timing.str();
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  g.argv.assign(argv, argv + argc);

  CLI::App app{"Multi-style fine-tuning of a small style-based generator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msgan::kVersion);
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override every seed in the configuration");
  app.add_option("--out", g.out, "Output directory (default: $MSGAN_OUT/<command> or runs/<command>)");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded, bit-reproducible execution");

  auto* pretrain = app.add_subcommand("pretrain", "Train the base GAN on the synthetic dataset");
  pretrain->fallthrough();

  std::string base_path, refs_dir, model_path, input, styles = "all", grid, mode = "sample", inputs_dir;
  int synthetic = 0, count = 16, iterations = 0;
  bool compare_identity = false;
  std::vector<int> ns;

  auto* train = app.add_subcommand("train", "Fine-tune on a directory of reference PNGs");
  train->add_option("--base", base_path, "Base checkpoint")->required()->check(CLI::ExistingFile);
  train->add_option("--refs", refs_dir, "Directory of reference PNGs; file stems name the styles");
  train->add_option("--synthetic", synthetic, "Generate N synthetic references instead of --refs");
  train->fallthrough();

  auto* invert = app.add_subcommand("invert", "Invert an image into style space");
  invert->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  invert->add_option("--input", input)->required()->check(CLI::ExistingFile);
  invert->fallthrough();

  auto* stylize = app.add_subcommand("stylize", "Render an input in every requested style");
  stylize->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  stylize->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  stylize->add_option("--input", input)->required()->check(CLI::ExistingFile);
  stylize->add_option("--styles", styles, "Comma separated names or 'all'");
  stylize->add_option("--grid", grid, "Contact sheet path");
  stylize->fallthrough();

  auto* explore = app.add_subcommand("explore", "Random multistyle samples or novel style mixes");
  explore->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  explore->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  explore->add_option("--mode", mode)->check(CLI::IsMember({"mix", "sample"}));
  explore->add_option("--count", count)->check(CLI::PositiveNumber);
  explore->add_option("--styles", styles, "Base and partner style for mix mode");
  explore->add_option("--input", input, "Source image for mix mode")->check(CLI::ExistingFile);
  explore->fallthrough();

  auto* eval = app.add_subcommand("eval", "SIFID of stylized inputs against the references");
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--refs", refs_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--inputs", inputs_dir)->check(CLI::ExistingDirectory);
  eval->add_flag("--compare-identity", compare_identity, "Also score the untrained identity bank");
  eval->fallthrough();

  auto* bench = app.add_subcommand("bench", "Multistyle vs single-style training time and storage");
  bench->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  bench->add_option("--N", ns, "Style counts")->delimiter(',');
  bench->add_option("--iterations", iterations)->check(CLI::PositiveNumber);
  bench->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error\tconfig\t" << e.what() << '\n';
    return 2;
  }

  if (g.deterministic) Eigen::setNbThreads(1);

  try {
    if (*pretrain) cmd_pretrain(g);
    else if (*train) cmd_train(g, base_path, refs_dir, synthetic);
    else if (*invert) cmd_invert(g, base_path, input);
    else if (*stylize) cmd_stylize(g, model_path, base_path, input, styles, grid);
    else if (*explore) cmd_explore(g, model_path, base_path, mode, count, styles, input);
    else if (*eval) cmd_eval(g, model_path, base_path, refs_dir, inputs_dir, compare_identity);
    else if (*bench) cmd_bench(g, base_path, ns, iterations);
  } catch (const msgan::Error& e) {
    std::cerr << "error\t" << msgan::error_class(e.kind()) << '\t' << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error\tconfig\t" << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error\tio\t" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error\tnumeric\t" << e.what() << '\n';
    return 1;
  }
  return 0;
}
