#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "camreid/dataio.hpp"
#include "camreid/experiment.hpp"
#include "camreid/gradcheck_suite.hpp"
#include "camreid/metrics.hpp"
#include "camreid/report.hpp"
#include "json.hpp"

namespace camreid::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string manifest;
  std::string query;
  std::string gallery;
  std::string distance;
  std::string method = "method";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t epochs = 30;
  double lambda = 0.01;
  double mu = 1.0;
  bool no_apra = false;
  bool no_reversal = false;
  std::size_t seeds = 1;
  std::size_t grad_seeds = 20;
  std::string inject_fault;
  std::vector<std::string> inputs;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

json read_json(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw io::InputError(path + ": " + e.what());
  }
}

// Copies `doc[key]` into `target` unless `flag` was given on the command line.
template <typename T>
void from_manifest(const json& doc, const char* key, const CLI::App& app,
                   const char* flag, T& target) {
  if (!doc.contains(key)) return;
  const CLI::Option* opt = app.get_option_no_throw(flag);
  if (opt != nullptr && opt->count() > 0) return;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw io::InputError(std::string("manifest key '") + key + "': " + e.what());
  }
}

void apply_manifest(const json& doc, const CLI::App& app, Options& o) {
  from_manifest(doc, "seed", app, "--seed", o.seed);
  from_manifest(doc, "out_dir", app, "--out-dir", o.out_dir);
  from_manifest(doc, "epochs", app, "--epochs", o.epochs);
  from_manifest(doc, "lambda", app, "--lambda", o.lambda);
  from_manifest(doc, "mu", app, "--mu", o.mu);
  from_manifest(doc, "no_apra", app, "--no-apra", o.no_apra);
  from_manifest(doc, "no_reversal", app, "--no-reversal", o.no_reversal);
  from_manifest(doc, "seeds", app, "--seeds", o.seeds);
  from_manifest(doc, "method", app, "--method", o.method);
}

// Feature count of an embedding table, from its header or first row.
std::size_t infer_dim(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::InputError("cannot open embeddings file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (commas < 3) throw io::InputError(path + ":1: expected at least one feature column");
    return commas - 2;
  }
  return 1;
}

io::DatasetManifest resolve_dataset(const Options& o) {
  io::DatasetManifest m;
  if (!o.manifest.empty()) {
    m = io::load_manifest(o.manifest);
  } else {
    if (o.query.empty() || o.gallery.empty()) {
      throw io::InputError("need --manifest, or both --query and --gallery");
    }
    m.embedding_dim = infer_dim(o.query);
  }
  if (!o.query.empty()) m.query = o.query;
  if (!o.gallery.empty()) m.gallery = o.gallery;
  if (!o.distance.empty()) {
    try {
      m.distance = metrics::parse_distance(o.distance);
    } catch (const std::invalid_argument& e) {
      throw io::InputError(e.what());
    }
  }
  return m;
}

report::EvaluationReport evaluate_dataset(const Options& o) {
  const io::DatasetManifest m = resolve_dataset(o);
  const io::QueryGallery data = io::load_dataset(m);
  metrics::RetrievalProtocol protocol;
  protocol.distance = m.distance;
  protocol.cross_camera_only = m.cross_camera_only;
  return report::make_report(m.name, o.method,
                             metrics::evaluate(data.queries, data.gallery, protocol));
}

void print_summary(std::ostream& out, const report::EvaluationReport& r) {
  const auto& s = r.summary;
  out << "dataset: " << r.dataset << "  method: " << r.method << '\n';
  out << "queries: " << r.num_queries << " scored, " << r.num_excluded
      << " excluded\n";
  out << "global mAP: " << fmt("%.4f", r.global_map) << '\n';
  out << "Rank-1: " << fmt("%.4f", r.rank1) << '\n';
  out << "weakest q-mAP: camera " << s.q.weakest.camera << " ("
      << report::percent1(s.q.weakest.value) << ")\n";
  out << "weakest g-mAP: camera " << s.g.weakest.camera << " ("
      << report::percent1(s.g.weakest.value) << ")\n";
  out << "average q-mAP: " << report::percent1(s.q.mean)
      << "  average g-mAP: " << report::percent1(s.g.mean) << '\n';
}

void print_table(std::ostream& out, const report::EvaluationReport& r) {
  auto cell = [](const std::optional<double>& v) {
    return v ? report::percent1(*v) : std::string("-");
  };
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %10s %12s\n", "camera", "q-mAP",
                "g-mAP", "queries", "g-queries");
  out << buf;
  for (const auto& [cam, e] : r.per_camera) {
    std::snprintf(buf, sizeof buf, "%-8zu %8s %8s %10zu %12zu\n", cam,
                  cell(e.q_map).c_str(), cell(e.g_map).c_str(), e.num_queries,
                  e.num_g_queries);
    out << buf;
  }
  const auto& s = r.summary;
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s\n", "weakest",
                report::percent1(s.q.weakest.value).c_str(),
                report::percent1(s.g.weakest.value).c_str());
  out << buf;
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s\n", "average",
                report::percent1(s.q.mean).c_str(), report::percent1(s.g.mean).c_str());
  out << buf;
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s\n", "spread",
                report::percent1(s.q.spread).c_str(), report::percent1(s.g.spread).c_str());
  out << buf;
}

void write_report_files(const fs::path& dir, const report::EvaluationReport& r) {
  io::write_file(dir / "report.json", report::to_json(r));
  io::write_file(dir / "report.csv", report::summary_csv({r}));
  io::write_file(dir / "per_camera.csv", report::per_camera_csv(r));
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto r = evaluate_dataset(o);
  const fs::path dir = o.out_dir.empty() ? fs::path(".") : fs::path(o.out_dir);
  write_report_files(dir, r);
  print_summary(out, r);
  out << "wrote " << (dir / "report.json").generic_string() << ", "
      << (dir / "report.csv").generic_string() << ", "
      << (dir / "per_camera.csv").generic_string() << '\n';
  return kExitOk;
}

int cmd_percam(const Options& o, std::ostream& out) {
  const auto r = evaluate_dataset(o);
  print_table(out, r);
  if (!o.out_dir.empty()) {
    io::write_file(fs::path(o.out_dir) / "per_camera.csv", report::per_camera_csv(r));
  }
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.inputs.empty()) throw io::InputError("report: need at least one --input");
  std::vector<report::EvaluationReport> rows;
  for (const auto& path : o.inputs) {
    try {
      rows.push_back(report::from_json(io::read_file(path)));
    } catch (const io::InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw io::InputError(path + ": " + e.what());
    }
  }
  const fs::path dir = o.out_dir.empty() ? fs::path(".") : fs::path(o.out_dir);
  if (rows.size() == 1) {
    write_report_files(dir, rows.front());
  } else {
    io::write_file(dir / "report.csv", report::summary_csv(rows));
  }
  out << report::summary_csv(rows);
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  GradSuiteOptions opts;
  opts.seed = o.seed;
  opts.num_seeds = o.grad_seeds;
  opts.fault_op = o.inject_fault;
  std::vector<GradCaseResult> results;
  try {
    results = run_gradcheck_suite(opts);
  } catch (const std::invalid_argument& e) {
    throw io::InputError(e.what());
  }
  std::vector<std::string> failed;
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-18s max_rel_err=%.3e  tol=%.0e  %s\n",
                  r.name.c_str(), r.max_rel_error, r.tolerance,
                  r.passed() ? "ok" : "FAIL");
    out << buf;
    if (!r.passed()) failed.push_back(r.name);
  }
  if (failed.empty()) {
    out << "gradcheck: all " << results.size() << " ops pass over " << o.grad_seeds
        << " seeds\n";
    return kExitOk;
  }
  err << "gradcheck: failing ops:";
  for (const auto& f : failed) err << ' ' << f;
  err << '\n';
  return kExitCheckFailed;
}

toy::ExperimentConfig toy_config(const Options& o, const json& doc) {
  toy::ExperimentConfig cfg;
  cfg.train.epochs = o.epochs;
  cfg.train.lambda = o.lambda;
  cfg.train.mu = o.mu;
  cfg.train.reversal = !o.no_reversal;
  try {
    if (doc.contains("world")) {
      const json& w = doc.at("world");
      auto& c = cfg.world;
      c.num_persons = w.value("num_persons", c.num_persons);
      c.num_test_persons = w.value("num_test_persons", c.num_test_persons);
      c.num_cameras = w.value("num_cameras", c.num_cameras);
      c.samples_per_pair = w.value("samples_per_pair", c.samples_per_pair);
      c.gain_spread = w.value("gain_spread", c.gain_spread);
      c.bias_scale = w.value("bias_scale", c.bias_scale);
      c.background_scale = w.value("background_scale", c.background_scale);
      c.noise_scale = w.value("noise_scale", c.noise_scale);
      c.latent_jitter = w.value("latent_jitter", c.latent_jitter);
      c.style_strength = w.value("style_strength", c.style_strength);
    }
    cfg.train.lr = doc.value("lr", cfg.train.lr);
    cfg.train.momentum = doc.value("momentum", cfg.train.momentum);
    cfg.train.margin = doc.value("margin", cfg.train.margin);
    cfg.train.lr_milestones = doc.value("lr_milestones", cfg.train.lr_milestones);
    cfg.train.lr_decay = doc.value("lr_decay", cfg.train.lr_decay);
    cfg.train.warmup_epochs = doc.value("warmup_epochs", cfg.train.warmup_epochs);
  } catch (const json::exception& e) {
    throw io::InputError(std::string("manifest: ") + e.what());
  }
  try {
    cfg.world.validate();
    if (!o.no_apra) cfg.backbone.apra.validate();
  } catch (const std::invalid_argument& e) {
    throw io::InputError(e.what());
  }
  if (!(o.mu > 0.0)) throw io::InputError("--mu must be > 0");
  if (!(o.lambda >= 0.0)) throw io::InputError("--lambda must be >= 0");
  return cfg;
}

void print_variant(std::ostream& out, const toy::VariantResult& r) {
  const auto& s = r.report.summary;
  out << "seed " << r.seed << ' ' << r.name << ": global mAP "
      << fmt("%.4f", r.report.global_map) << ", Rank-1 " << fmt("%.4f", r.report.rank1)
      << ", weakest q-mAP camera " << s.q.weakest.camera << " ("
      << report::percent1(s.q.weakest.value) << "), average q-mAP "
      << report::percent1(s.q.mean) << ", probe acc " << fmt("%.4f", r.probe_acc)
      << '\n';
}

void write_variant(const fs::path& dir, const std::string& stem,
                   const toy::VariantResult& r) {
  io::write_file(dir / ("epochs_" + stem + ".csv"), toy::epoch_log_csv(r.log));
  io::write_file(dir / ("report_" + stem + ".json"), report::to_json(r.report));
  io::write_file(dir / ("per_camera_" + stem + ".csv"), report::per_camera_csv(r.report));
}

int cmd_toytrain(const Options& o, const json& doc, std::ostream& out) {
  const toy::ExperimentConfig cfg = toy_config(o, doc);
  const fs::path dir = o.out_dir.empty() ? fs::path("toytrain_out") : fs::path(o.out_dir);
  if (o.seeds == 0) throw io::InputError("--seeds must be >= 1");

  if (o.seeds == 1) {
    const toy::ToyWorld world = toy::generate_world(cfg.world, o.seed);
    std::vector<report::EvaluationReport> rows;
    for (const bool apra : {false, true}) {
      if (apra && o.no_apra) break;
      const std::string name = apra ? "apra" : "baseline";
      const auto r = toy::run_variant(world, cfg, apra, o.seed, [&](const toy::EpochLog& e) {
        out << name << " epoch " << e.epoch << ": person_ce " << fmt("%.4f", e.loss_person_ce)
            << ", triplet " << fmt("%.4f", e.loss_triplet) << ", camera_ce "
            << fmt("%.4f", e.loss_camera_ce) << ", probe acc " << fmt("%.4f", e.probe_acc)
            << '\n';
      });
      write_variant(dir, name, r);
      print_variant(out, r);
      rows.push_back(r.report);
    }
    io::write_file(dir / "report.csv", report::summary_csv(rows));
    return kExitOk;
  }

  if (o.no_apra) throw io::InputError("--seeds > 1 compares both variants; drop --no-apra");
  if (o.seeds < 3) throw io::InputError("--seeds must be 1 or at least 3");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(o.seed + i);
  const auto cmp = toy::compare_variants(cfg, seeds, [&](const toy::VariantResult& r) {
    write_variant(dir, "seed" + std::to_string(r.seed) + "_" + r.name, r);
    print_variant(out, r);
  });
  io::write_file(dir / "per_seed.csv", toy::per_seed_csv(cmp));
  io::write_file(dir / "comparison.csv", toy::comparison_csv(cmp));
  out << "apra improves weakest q-mAP in " << cmp.seeds_weakest_q_improved() << "/"
      << seeds.size() << " seeds\n";
  out << "apra lowers camera-probe accuracy in " << cmp.seeds_probe_reduced() << "/"
      << seeds.size() << " seeds\n";
  out << "baseline weakest camera is the outlier (camera " << cfg.world.outlier_camera()
      << ") in " << cmp.seeds_outlier_weakest(cfg.world.outlier_camera()) << "/"
      << seeds.size() << " seeds\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Camera-aware person re-identification evaluation and APRA toolkit",
               "camreid"};
  app.require_subcommand(1);

  auto* eval = app.add_subcommand("eval", "Evaluate embeddings and write JSON/CSV reports");
  auto* percam = app.add_subcommand("percam", "Print the per-camera q-mAP/g-mAP table");
  for (auto* sub : {eval, percam}) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest (JSON)");
    sub->add_option("--query", o.query, "Query embedding CSV (overrides manifest)");
    sub->add_option("--gallery", o.gallery, "Gallery embedding CSV (overrides manifest)");
    sub->add_option("--distance", o.distance, "euclidean or cosine (overrides manifest)");
    sub->add_option("--method", o.method, "Method name recorded in the report");
    sub->add_option("--out-dir", o.out_dir, "Directory for report files");
  }

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  grad->add_option("--seed", o.seed, "Base seed");
  grad->add_option("--seeds", o.grad_seeds, "Random inputs per op")->check(CLI::PositiveNumber);
  grad->add_option("--inject-fault", o.inject_fault,
                   "Scale the named op's backward pass by 2 (test mode)");
  grad->add_option("--manifest", o.manifest, "JSON file with flag values");

  auto* toy = app.add_subcommand("toytrain", "Train baseline and +APRA on the toy world");
  toy->add_option("--manifest", o.manifest, "JSON file with flag values and world config");
  toy->add_option("--seed", o.seed, "World and training seed (first seed with --seeds)");
  toy->add_option("--seeds", o.seeds, "Number of consecutive seeds to compare");
  toy->add_option("--epochs", o.epochs, "Training epochs (0 evaluates the untrained model)");
  toy->add_option("--lambda", o.lambda, "Camera-loss weight");
  toy->add_option("--mu", o.mu, "Gradient reversal scale");
  toy->add_flag("--no-apra", o.no_apra, "Train only the baseline");
  toy->add_flag("--no-reversal", o.no_reversal, "Ablation: camera branch without reversal");
  toy->add_option("--out-dir", o.out_dir, "Directory for CSV and report files");

  auto* rep = app.add_subcommand("report", "Re-render report JSON files as CSV tables");
  rep->add_option("--input", o.inputs, "Report JSON written by eval")->required();
  rep->add_option("--out-dir", o.out_dir, "Directory for report files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "camreid: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    }
    return kExitInputError;
  }

  try {
    json doc = json::object();
    CLI::App* sub = app.get_subcommands().front();
    if (!o.manifest.empty()) {
      doc = read_json(o.manifest);
      apply_manifest(doc, *sub, o);
    }
    if (sub == eval) return cmd_eval(o, out);
    if (sub == percam) return cmd_percam(o, out);
    if (sub == grad) return cmd_gradcheck(o, out, err);
    if (sub == toy) return cmd_toytrain(o, doc, out);
    return cmd_report(o, out);
  } catch (const io::InputError& e) {
    err << "camreid: input error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const toy::DivergenceError& e) {
    err << "camreid: training diverged at epoch " << e.epoch() << '\n';
    return kExitCheckFailed;
  } catch (const metrics::MetricError& e) {
    err << "camreid: metric error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::invalid_argument& e) {
    err << "camreid: invalid input: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "camreid: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace camreid::cli
