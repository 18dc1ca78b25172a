#include "camreid/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "camreid/metrics.hpp"

namespace camreid::toy {

std::vector<metrics::EmbeddingRecord> embed_split(
    const TinyBackbone& model, const std::vector<ToySample>& samples,
    metrics::Split split) {
  std::vector<Tensor> images;
  images.reserve(samples.size());
  for (const auto& s : samples) images.push_back(s.image);
  auto vectors = model.embed(images);
  std::vector<metrics::EmbeddingRecord> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i].person_id = static_cast<std::int64_t>(samples[i].person);
    out[i].camera_id = samples[i].camera;
    out[i].split = split;
    out[i].vector = std::move(vectors[i]);
  }
  return out;
}

VariantResult run_variant(const ToyWorld& world, const ExperimentConfig& config,
                          bool use_apra, std::uint64_t seed,
                          const std::function<void(const EpochLog&)>& on_epoch) {
  BackboneConfig bc = config.backbone;
  bc.in_channels = world.config.channels;
  bc.num_persons = world.config.num_persons - world.config.num_test_persons;
  bc.num_cameras = world.config.num_cameras;
  bc.use_apra = use_apra;
  bc.apra.camera_loss_weight = config.train.lambda;
  bc.apra.reversal_scale = config.train.mu;

  std::mt19937_64 init_rng(seed);
  TinyBackbone model(bc, init_rng);

  VariantResult r;
  r.name = use_apra ? "apra" : "baseline";
  r.seed = seed;
  r.log = train(model, world, config.train, seed, on_epoch);

  const auto queries = embed_split(model, world.query, metrics::Split::kQuery);
  const auto gallery = embed_split(model, world.gallery, metrics::Split::kGallery);
  const auto ev = metrics::evaluate(queries, gallery, metrics::RetrievalProtocol{});
  r.report = report::make_report("toyworld", r.name, ev);
  r.probe_acc = test_probe_accuracy(model, world);
  return r;
}

std::size_t Comparison::seeds_weakest_q_improved() const {
  std::size_t n = 0;
  for (const auto& s : runs)
    if (s.apra.report.summary.q.weakest.value >
        s.baseline.report.summary.q.weakest.value)
      ++n;
  return n;
}

std::size_t Comparison::seeds_probe_reduced() const {
  std::size_t n = 0;
  for (const auto& s : runs)
    if (s.apra.probe_acc < s.baseline.probe_acc) ++n;
  return n;
}

std::size_t Comparison::seeds_outlier_weakest(std::size_t outlier_camera) const {
  std::size_t n = 0;
  for (const auto& s : runs)
    if (s.baseline.report.summary.q.weakest.camera == outlier_camera) ++n;
  return n;
}

Comparison compare_variants(const ExperimentConfig& config,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const VariantResult&)>& on_run) {
  if (seeds.size() < 3) {
    throw std::invalid_argument("compare_variants: need at least 3 seeds");
  }
  Comparison c;
  for (std::uint64_t seed : seeds) {
    const ToyWorld world = generate_world(config.world, seed);
    SeedComparison sc;
    sc.seed = seed;
    sc.baseline = run_variant(world, config, false, seed);
    if (on_run) on_run(sc.baseline);
    sc.apra = run_variant(world, config, true, seed);
    if (on_run) on_run(sc.apra);
    c.runs.push_back(std::move(sc));
  }
  return c;
}

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_row(std::ostringstream& os, const VariantResult& r) {
  const auto& s = r.report.summary;
  os << r.seed << ',' << r.name << ',' << g9(r.report.global_map) << ','
     << g9(r.report.rank1) << ',' << s.q.weakest.camera << ','
     << g9(s.q.weakest.value) << ',' << s.g.weakest.camera << ','
     << g9(s.g.weakest.value) << ',' << g9(s.q.mean) << ',' << g9(s.g.mean)
     << ',' << g9(r.probe_acc) << '\n';
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;
};

Stat stat(const std::vector<double>& v) {
  Stat s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(v.size()));
  return s;
}

}  // namespace

std::string per_seed_csv(const Comparison& c) {
  std::ostringstream os;
  os << "seed,variant,global_map,rank1,weakest_q_camera,weakest_q_map,"
        "weakest_g_camera,weakest_g_map,average_q_map,average_g_map,probe_acc\n";
  for (const auto& s : c.runs) {
    write_row(os, s.baseline);
    write_row(os, s.apra);
  }
  return os.str();
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream os;
  os << "variant,seeds,global_map,global_map_std,weakest_q_map,weakest_q_map_std,"
        "weakest_g_map,weakest_g_map_std,average_q_map,average_q_map_std,"
        "average_g_map,average_g_map_std,probe_acc,probe_acc_std\n";
  for (const bool apra : {false, true}) {
    std::vector<double> gm, wq, wg, aq, ag, pr;
    for (const auto& s : c.runs) {
      const VariantResult& r = apra ? s.apra : s.baseline;
      const auto& sum = r.report.summary;
      gm.push_back(r.report.global_map);
      wq.push_back(sum.q.weakest.value);
      wg.push_back(sum.g.weakest.value);
      aq.push_back(sum.q.mean);
      ag.push_back(sum.g.mean);
      pr.push_back(r.probe_acc);
    }
    os << (apra ? "apra" : "baseline") << ',' << c.runs.size();
    for (const auto* v : {&gm, &wq, &wg, &aq, &ag, &pr}) {
      const Stat st = stat(*v);
      os << ',' << g9(st.mean) << ',' << g9(st.sd);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace camreid::toy
