// bongard: generate synthetic episodes, train mimic models, evaluate and sweep methods.

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "bongard/bench.hpp"
#include "bongard/checkpoint.hpp"
#include "bongard/config.hpp"
#include "bongard/episode_io.hpp"
#include "bongard/train.hpp"

namespace fs = std::filesystem;
using namespace bongard;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;

  RunConfig load() const { return load_run_config(config, overrides); }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.overrides, "override a config field, e.g. train.max_lr=1e-3");
  app->add_option("-o,--out", c.out, "output directory (default: <run_root>/<timestamp>_seed<N>)");
}

fs::path run_dir(const Common& c, const RunConfig& cfg) {
  fs::path dir = c.out;
  if (dir.empty()) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "_seed" << cfg.seed;
    dir = fs::path(cfg.run_root) / name.str();
  }
  fs::create_directories(dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  return dir;
}

Dataset load_or_generate(const std::string& data, const RunConfig& cfg) {
  if (!data.empty()) return parse_episode_file(data);
  std::cerr << "no --data given; generating from episode_spec (seed " << cfg.episode_spec.seed << ")\n";
  return generate_dataset(cfg.episode_spec).features;
}

std::optional<MimicModel> load_model_for(const MethodSpec& m) {
  if (!is_mimic(m.method)) return std::nullopt;
  if (m.checkpoint.empty()) throw DomainError("method " + std::string(method_name(m.method)) + " requires method.checkpoint");
  return load_mimic(m.checkpoint);
}

int cmd_generate(const Common& c, bool raw) {
  const auto cfg = c.load();
  const auto dir = run_dir(c, cfg);
  const auto data = generate_dataset(cfg.episode_spec, raw);
  write_episode_file(dir / "episodes.jsonl", data.features);
  if (raw) write_episode_file(dir / "episodes_raw.jsonl", data.raw);
  std::cout << "wrote " << data.features.episodes.size() << " episodes to " << (dir / "episodes.jsonl").string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data_path, long log_every) {
  const auto cfg = c.load();
  const auto dir = run_dir(c, cfg);
  const auto data = load_or_generate(data_path, cfg);
  validate_dataset(data);
  std::ofstream loss_csv(dir / "loss.csv");
  loss_csv << "step,loss,lr\n";
  auto res = train_mimic(data, cfg.mimic, cfg.train, [&](long step, double loss, double lr) {
    std::cout << "step " << step << " loss " << loss << " lr " << lr << "\n";
  }, log_every);
  loss_csv << std::setprecision(17);
  for (std::size_t i = 0; i < res.loss_curve.size(); ++i)
    loss_csv << i << "," << res.loss_curve[i] << "," << onecycle_lr(static_cast<long>(i) + 1, cfg.train) << "\n";
  save_mimic(res.model, dir / "checkpoint.bin");
  if (!res.skipped.empty()) std::cout << res.skipped.size() << " training episodes skipped (teacher fit failed)\n";
  SvmOptions svm;
  svm.C = cfg.train.svm_C;
  for (const auto* split : {"val", "test"})
    if (!data.split(split).empty())
      std::cout << split << " fidelity " << mimic_fidelity(res.model, data, split, svm) << "\n";
  std::cout << "checkpoint " << (dir / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& data_paths, const std::vector<std::string>& splits, bool scores) {
  const auto cfg = c.load();
  const auto dir = run_dir(c, cfg);
  const auto model = load_model_for(cfg.method);
  std::vector<EvalReport> reports;
  std::vector<std::string> sources = data_paths.empty() ? std::vector<std::string>{""} : data_paths;
  for (std::size_t di = 0; di < sources.size(); ++di) {
    const auto data = load_or_generate(sources[di], cfg);
    const Evaluator ev(cfg.method, data, model ? &*model : nullptr);
    for (const auto& split : splits) {
      auto r = ev.evaluate(split);
      std::cout << r.method << "/" << r.normalization << " " << split << " accuracy " << r.accuracy() << " (" << r.total
                << " queries, " << r.skipped_episodes << " skipped, " << r.runtime_s << " s)\n";
      if (scores) write_text(dir / ("scores_" + std::to_string(di) + "_" + split + ".csv"), scores_csv(r));
      reports.push_back(std::move(r));
    }
  }
  report(reports, dir);
  std::cout << report_markdown(aggregate(reports));
  return 0;
}

int cmd_sweep(const Common& c, const std::string& data_path, const std::string& split, const std::string& axis,
              const std::vector<std::size_t>& levels, int repeats) {
  const auto cfg = c.load();
  const auto dir = run_dir(c, cfg);
  const auto data = load_or_generate(data_path, cfg);
  const auto model = load_model_for(cfg.method);
  const auto t = robustness_sweep(cfg.method, data, split, parse_axis(axis), levels, model ? &*model : nullptr, repeats, cfg.seed);
  write_text(dir / "sweep.csv", sweep_csv(t));
  write_text(dir / "sweep.md", sweep_markdown(t));
  std::cout << sweep_markdown(t);
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t probes, double threshold) {
  const auto cfg = c.load();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x6C));
  EpisodeSpec spec = cfg.episode_spec;
  spec.splits = {{"train", 1, 1}};
  const auto episode = generate_dataset(spec).features.episodes.front();
  const Episode standardized = standardize_episode(episode);
  const auto supports = standardized.labeled_supports();
  double worst = 0.0;
  for (auto mode : {MimicMode::prototype_mimic, MimicMode::svm_mimic}) {
    MimicConfig mc = cfg.mimic;
    mc.mode = mode;
    mc.token_dim = spec.dim;
    MimicModel model(mc);
    model.init(rng);
    SvmOptions svm;
    svm.C = cfg.train.svm_C;
    const auto teacher = teacher_targets(mode, standardized, svm);
    LossFn loss = [&](std::span<const double> p, std::span<double> g) {
      if (g.empty()) return mimic_loss(predict_targets(model, p, supports), teacher);
      return mimic_loss_and_grad(model, p, supports, teacher, g);
    };
    const auto r = gradient_check(loss, model.params().data(), probes, rng);
    std::cout << mode_name(mode) << " max_rel_error " << r.max_rel_error << " max_abs_error " << r.max_abs_error << "\n";
    worst = std::max(worst, r.max_rel_error);
  }
  {
    EncoderConfig ec = cfg.encoder;
    ec.raw_dim = spec.raw_dim;
    Encoder enc(ec);
    enc.init(rng);
    const RawMap map(spec);
    const Episode raw = map_features(episode, map);
    LossFn loss = [&](std::span<const double> p, std::span<double> g) {
      return encoder_loss(enc, p, raw, kDefaultTemperature, g);
    };
    const auto r = gradient_check(loss, enc.params().data(), probes, rng);
    std::cout << "encoder max_rel_error " << r.max_rel_error << " max_abs_error " << r.max_abs_error << "\n";
    worst = std::max(worst, r.max_rel_error);
  }
  std::cout << "max " << worst << (worst < threshold ? " ok" : " FAIL") << "\n";
  return worst < threshold ? 0 : 1;
}

int cmd_train_encoder(const Common& c, long steps, double lr) {
  const auto cfg = c.load();
  const auto dir = run_dir(c, cfg);
  const auto gen = generate_dataset(cfg.episode_spec, true);
  EncoderConfig ec = cfg.encoder;
  ec.raw_dim = cfg.episode_spec.raw_dim;
  Encoder enc(ec);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xE7C));
  enc.init(rng);
  const auto train = gen.raw.split("train");
  const auto test = gen.raw.split("test");
  if (train.empty()) throw DomainError("train-encoder: empty train split");
  std::cout << "test class separation before " << class_separation(enc, test) << "\n";
  AdamState state(enc.params().size());
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  for (long s = 0; s < steps; ++s) {
    const double loss = encoder_train_step(enc, *train[pick(rng)], kDefaultTemperature, state, lr, cfg.train);
    if (s % std::max(1L, steps / 10) == 0) std::cout << "step " << s << " loss " << loss << "\n";
  }
  std::cout << "test class separation after " << class_separation(enc, test) << "\n";
  save_encoder(enc, dir / "encoder.bin");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot Bongard episode toolkit"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, sweep_c, gc_c, enc_c;

  auto* gen = app.add_subcommand("generate", "write a synthetic episode corpus");
  add_common(gen, gen_c);
  bool raw = false;
  gen->add_flag("--raw", raw, "also write raw-input episodes");

  auto* train = app.add_subcommand("train", "train a mimic model, write checkpoint and loss curve");
  add_common(train, train_c);
  std::string train_data;
  long log_every = 500;
  train->add_option("-d,--data", train_data, "episode file (default: generate from config)");
  train->add_option("--log-every", log_every);

  auto* eval = app.add_subcommand("eval", "evaluate a method; one data file per seed");
  add_common(eval, eval_c);
  std::vector<std::string> eval_data, eval_splits{"test"};
  bool scores = false;
  eval->add_option("-d,--data", eval_data, "episode files");
  eval->add_option("--split", eval_splits);
  eval->add_flag("--scores", scores, "write per-query scores");

  auto* sweep = app.add_subcommand("sweep", "robustness sweep over support count or label noise");
  add_common(sweep, sweep_c);
  std::string sweep_data, sweep_split = "test", axis = "support_count";
  std::vector<std::size_t> levels;
  int repeats = 3;
  sweep->add_option("-d,--data", sweep_data);
  sweep->add_option("--split", sweep_split);
  sweep->add_option("--axis", axis)->check(CLI::IsMember({"support_count", "label_noise"}));
  sweep->add_option("--levels", levels)->required();
  sweep->add_option("--repeats", repeats)->check(CLI::PositiveNumber);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all analytic gradients");
  add_common(gc, gc_c);
  std::size_t probes = 300;
  double threshold = 1e-6;
  gc->add_option("--probes", probes);
  gc->add_option("--threshold", threshold);

  auto* enc = app.add_subcommand("train-encoder", "contrastive training of the raw-input encoder");
  add_common(enc, enc_c);
  long enc_steps = 2000;
  double enc_lr = 1e-3;
  enc->add_option("--steps", enc_steps);
  enc->add_option("--lr", enc_lr);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(gen_c, raw);
    if (*train) return cmd_train(train_c, train_data, log_every);
    if (*eval) return cmd_eval(eval_c, eval_data, eval_splits, scores);
    if (*sweep) return cmd_sweep(sweep_c, sweep_data, sweep_split, axis, levels, repeats);
    if (*gc) return cmd_gradcheck(gc_c, probes, threshold);
    if (*enc) return cmd_train_encoder(enc_c, enc_steps, enc_lr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
