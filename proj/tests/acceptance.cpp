// Runs the acceptance criteria end to end and prints one verdict line per
// criterion. Exits non-zero when any criterion fails.

#include <malloc.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

#include "oracles.hpp"
#include "styleshift/corruptions.hpp"
#include "styleshift/evaluation.hpp"
#include "styleshift/experiment.hpp"
#include "styleshift/frequency.hpp"
#include "styleshift/stylization.hpp"
#include "training_support.hpp"

using namespace styleshift;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* format, Args... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

void append(std::string& detail, const std::string& part) {
  if (!detail.empty()) detail += "; ";
  detail += part;
}

void require(Verdict& v, bool ok, const std::string& what) {
  if (!ok) {
    v.pass = false;
    append(v.detail, "FAILED " + what);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_plane(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n) * n);
  for (double& v : p) v = rng.uniform();
  return p;
}

experiment::DeskData desk(const experiment::DeskDataOptions& options) {
  static const auto digits = experiment::load_digits(experiment::default_digits_path());
  return experiment::make_desk_data(digits, options);
}

// -- 1 ---------------------------------------------------------------------

Verdict metric_oracle() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    evaluation::AccuracyTable t;
    for (const auto& spec : corruptions::all_specs()) t[{spec.name, spec.severity}] = rng.uniform();
    worst = std::max(worst, std::abs(evaluation::mean_corruption_accuracy(t) -
                                     testing::brute_force_mean(t)));
  }
  evaluation::AccuracyTable fixture;
  for (const auto& spec : corruptions::all_specs()) {
    fixture[{spec.name, spec.severity}] = spec.category == corruptions::Category::noise ? 0.0 : 1.0;
  }
  const double weighted = evaluation::mean_corruption_accuracy(fixture);
  const double elapsed = seconds_since(t0);
  v.detail = fmt("max |fast - brute force| %.3g over 50 tables, fixture %.17g, %.3f s", worst,
                 weighted, elapsed);
  require(v, worst <= 1e-12, "table error above 1e-12");
  require(v, weighted == 0.75, "fixture not exactly 0.75");
  require(v, elapsed < 1.0, "runtime over 1 s");
  return v;
}

// -- 2 ---------------------------------------------------------------------

Verdict table_anchors() {
  Verdict v;
  const double a = 100 * evaluation::combined_mean(0.5473, 0.4133);
  const double b = 100 * evaluation::combined_mean(0.7616, 0.8257);
  // Half-up rounding to two decimals: within 0.005 of the printed value.
  v.detail = fmt("(54.73, 41.33) -> %.4f vs 48.03; (76.16, 82.57) -> %.4f vs 79.37", a, b);
  require(v, std::abs(a - 48.03) <= 0.005 + 1e-9, "first anchor");
  require(v, std::abs(b - 79.37) <= 0.005 + 1e-9, "second anchor");
  return v;
}

// -- 3 ---------------------------------------------------------------------

Verdict frequency_oracle() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);
  double spectrum_error = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    const auto plane = random_plane(rng, n);
    const auto fast = frequency::plane_spectrum(plane, n);
    const auto slow = testing::brute_force_spectrum(plane, n);
    if (fast.bins() != slow.bins()) {
      require(v, false, "bin count mismatch at n=" + std::to_string(n));
      continue;
    }
    for (std::size_t b = 0; b < fast.bins(); ++b) {
      spectrum_error = std::max(spectrum_error, std::abs(fast.power[b] - slow.power[b]));
    }
  }

  double leak = 0.0, idempotence = 0.0, parseval = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 32;
    const double tau = rng.uniform(1.0, 16.0);
    const auto plane = random_plane(rng, n);
    const auto once = frequency::lowpass_plane(plane, n, tau);
    const auto twice = frequency::lowpass_plane(once, n, tau);
    const auto field = frequency::FrequencyField::forward(once, n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (field.radius(r, c) >= tau) leak = std::max(leak, std::abs(field.at(r, c)));
      }
    }
    for (std::size_t i = 0; i < once.size(); ++i) {
      idempotence = std::max(idempotence, std::abs(once[i] - twice[i]));
    }
    const auto full = frequency::FrequencyField::forward(plane, n, n);
    double spatial = 0.0, spectral = 0.0;
    for (double x : plane) spatial += x * x;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) spectral += std::norm(full.at(r, c));
    }
    parseval = std::max(parseval, std::abs(spectral / (n * n) - spatial) / spatial);
  }
  const double elapsed = seconds_since(t0);
  v.detail = fmt("spectrum max error %.3g, leak beyond tau %.3g, idempotence %.3g, ", spectrum_error,
                 leak, idempotence) +
             fmt("Parseval rel %.3g, %.2f s", parseval, elapsed);
  require(v, spectrum_error <= 1e-9, "spectrum oracle");
  require(v, leak < 1e-8, "mask leak");
  require(v, idempotence <= 1e-6, "idempotence");
  require(v, parseval <= 1e-6, "Parseval");
  require(v, elapsed < 10.0, "runtime over 10 s");
  return v;
}

// -- 4 ---------------------------------------------------------------------

struct Moments {
  std::vector<double> mean, stddev;
};

Moments moments_of(const Eigen::MatrixXd& f) {
  Moments m;
  for (Eigen::Index c = 0; c < f.rows(); ++c) {
    const double mu = f.row(c).mean();
    m.mean.push_back(mu);
    m.stddev.push_back(std::sqrt((f.row(c).array() - mu).square().mean()));
  }
  return m;
}

Verdict stylizer_identities() {
  using namespace stylization;
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(404);
  bool zero_exact = true;
  double self_error = 0.0, moment_error = 0.0;
  const RawPixelCodec raw;
  const DecorrelatedColorCodec decorrelated;
  for (auto space : {FeatureSpace::raw_pixels, FeatureSpace::decorrelated_color}) {
    const FeatureCodec& codec =
        space == FeatureSpace::raw_pixels ? static_cast<const FeatureCodec&>(raw) : decorrelated;
    Stylizer s;
    s.feature_space = space;
    for (int i = 0; i < 100; ++i) {
      const Image content = testing::random_image(rng, 8, 8);
      Image style = testing::random_image(rng, 8, 8);
      for (double& x : style.data()) x = 0.2 + 0.5 * x;

      Stylizer off = s;
      off.strength = 0.0;
      zero_exact = zero_exact && moment_match_stylize(content, style, off) == content;

      const Image self = moment_match_stylize(content, content, s);
      for (std::size_t k = 0; k < self.size(); ++k) {
        self_error = std::max(self_error, std::abs(self.data()[k] - content.data()[k]));
      }

      const auto out = moment_match_detailed(content, style, s);
      const Moments got = moments_of(codec.encode(out.unclamped));
      const Moments want = moments_of(codec.encode(style));
      for (std::size_t c = 0; c < got.mean.size(); ++c) {
        moment_error = std::max(moment_error, std::abs(got.mean[c] - want.mean[c]));
        moment_error = std::max(moment_error, std::abs(got.stddev[c] - want.stddev[c]));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  v.detail = std::string("strength 0 ") + (zero_exact ? "bit-exact" : "NOT bit-exact") +
             fmt(", self-style max error %.3g, moment max error %.3g over 100 pairs x 2 spaces, %.2f s",
                 self_error, moment_error, elapsed);
  require(v, zero_exact, "strength 0 identity");
  require(v, self_error <= 1e-12, "self-style identity");
  require(v, moment_error <= 1e-5, "moment match");
  require(v, elapsed < 10.0, "runtime over 10 s");
  return v;
}

// -- 5 ---------------------------------------------------------------------

class RedChannel final : public stylization::FeatureExtractor {
 public:
  std::string name() const override { return "red"; }
  std::vector<stylization::FeatureLayer> extract(const Image& image) const override {
    stylization::FeatureLayer layer{"red", Eigen::MatrixXd(1, image.height() * image.width())};
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) layer.features(0, y * image.width() + x) = image.at(y, x, 0);
    }
    return {layer};
  }
};

Verdict gram_distance_checks() {
  using namespace stylization;
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const FilterBankFeatures bank;
  Rng rng(505);
  double self_max = 0.0, asymmetry = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Image a = testing::random_image(rng, 16, 16);
    const Image b = testing::random_image(rng, 16, 16);
    self_max = std::max(self_max, gram_distance(a, a, bank));
    asymmetry = std::max(asymmetry, std::abs(gram_distance(a, b, bank) - gram_distance(b, a, bank)));
  }

  Image a(2, 2, 3, 0.0), b(2, 2, 3, 0.0);
  const double av[4] = {0.1, 0.2, 0.3, 0.4};
  for (int k = 0; k < 4; ++k) {
    a.at(k / 2, k % 2, 0) = av[k];
    b.at(k / 2, k % 2, 0) = 0.5;
  }
  // Gram entries are sums of squares: 0.30 and 1.00.
  const double toy = gram_distance(a, b, RedChannel{}, GramNormalization::none);
  const double toy_normalized = gram_distance(a, b, RedChannel{});

  experiment::DeskDataOptions options;
  const auto data = desk(options);
  const std::size_t pairs = 600;
  auto mean_distance = [&](PolicyKind kind, const FeatureExtractor& features) {
    StylePolicy policy;
    policy.kind = kind;
    Rng draw(derive_seed(5, "gram_pairs", std::string(to_string(kind))));
    std::vector<double> d;
    for (std::size_t i = 0; i < pairs; ++i) {
      const ImageSample& content = data.photos[draw.uniform_int(data.photos.size())];
      const ImageSample& style = sample_style(content, data.photos, policy, draw);
      d.push_back(gram_distance(content.pixels, style.pixels, features));
    }
    return summarize(d).mean;
  };
  const double intraclass = mean_distance(PolicyKind::intradomain_intraclass, bank);
  const double unrestricted = mean_distance(PolicyKind::intradomain_unrestricted, bank);
  const PixelFeatures pixels;
  const double intraclass_px = mean_distance(PolicyKind::intradomain_intraclass, pixels);
  const double unrestricted_px = mean_distance(PolicyKind::intradomain_unrestricted, pixels);
  const double elapsed = seconds_since(t0);

  v.detail = fmt("self %.3g, asymmetry %.3g, toy %.12g / %.12g", self_max, asymmetry, toy,
                 toy_normalized) +
             fmt("; desk filterbank intraclass %.5f vs unrestricted %.5f", intraclass, unrestricted) +
             fmt(" (pixels %.5f vs %.5f) over 600 pairs each, %.1f s", intraclass_px,
                 unrestricted_px, elapsed);
  require(v, self_max == 0.0, "zero on identical images");
  require(v, asymmetry == 0.0, "symmetry");
  require(v, std::abs(toy - 0.70) <= 1e-12 && std::abs(toy_normalized - 0.175) <= 1e-12, "toy value");
  require(v, intraclass <= unrestricted, "intraclass ordering");
  require(v, elapsed < 120.0, "runtime over 2 min");
  return v;
}

// -- 6 ---------------------------------------------------------------------

Verdict corruption_suite() {
  using namespace corruptions;
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  experiment::DeskDataOptions options;
  options.photos = options.paintings = options.ood = 1;
  options.test = 50;
  const DomainDataset probe = desk(options).test;

  bool deterministic = true, in_range = true;
  std::vector<std::string> not_monotone;
  for (const auto& name : corruption_names()) {
    double previous = 0.0;
    bool monotone = true;
    for (int s = kMinSeverity; s <= kMaxSeverity; ++s) {
      const auto spec = CorruptionSpec::make(name, s);
      const auto first = corrupt_set(probe, spec, 17);
      const auto second = corrupt_set(probe, spec, 17);
      double total = 0.0;
      for (std::size_t i = 0; i < probe.size(); ++i) {
        const Image& img = first.samples[i].pixels;
        deterministic = deterministic && img.to_bytes() == second.samples[i].pixels.to_bytes();
        for (double x : img.data()) in_range = in_range && x >= 0.0 && x <= 1.0;
        total += mean_squared_error(img, probe[i].pixels);
      }
      const double d = total / probe.size();
      monotone = monotone && d >= previous;
      previous = d;
    }
    if (!monotone) not_monotone.push_back(name);
  }

  // Strict growth for the noise corruptions, averaged over 100 seeds.
  std::string noise_detail;
  for (const auto& name : corruptions_in(Category::noise)) {
    double previous = 0.0;
    double smallest_step = 1e300;
    for (int s = kMinSeverity; s <= kMaxSeverity; ++s) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        for (std::size_t i = 0; i < probe.size(); ++i) {
          total += mean_squared_error(
              apply_corruption(probe[i].pixels, CorruptionSpec::make(name, s), seed * 1000 + i),
              probe[i].pixels);
        }
      }
      const double d = total / (100.0 * probe.size());
      smallest_step = std::min(smallest_step, d - previous);
      previous = d;
    }
    if (!(smallest_step > 0.0)) not_monotone.push_back(name + " (strict)");
    append(noise_detail, name + fmt(" min step %.4g", smallest_step));
  }
  const double elapsed = seconds_since(t0);
  v.detail = std::string(deterministic ? "byte-identical" : "NOT deterministic") + ", " +
             (in_range ? "in [0, 1]" : "OUT of range") + ", " +
             std::to_string(15 - not_monotone.size()) + "/15 monotone; " + noise_detail +
             fmt("; %.1f s", elapsed);
  require(v, deterministic, "determinism");
  require(v, in_range, "range");
  for (const auto& name : not_monotone) require(v, false, "monotonicity of " + name);
  require(v, elapsed < 300.0, "runtime over 5 min");
  return v;
}

// -- 7 ---------------------------------------------------------------------

Verdict training_contracts() {
  using namespace training;
  using testing::GradFixture;
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_where;
  auto track = [&](const std::string& scheme, const testing::GradCheck& check) {
    if (check.worst > worst) {
      worst = check.worst;
      worst_where = scheme + " " + check.where;
    }
  };
  const auto cls = testing::classification_of;
  {
    GradFixture f(1);
    Network net{&f.backbone, {&f.h0}, nullptr};
    auto probes = testing::backbone_probes(f.backbone, cls);
    probes.push_back({&f.h0.linear.weight, cls});
    probes.push_back({&f.h0.linear.bias, cls});
    track("joint", testing::check_gradients(net, {f.part(0, 8, Domain::photo, 0, 1.0)}, {}, probes, 11));
  }
  {
    GradFixture f(2);
    Network net{&f.backbone, {&f.h0}, nullptr};
    auto probes = testing::backbone_probes(f.backbone, cls);
    probes.push_back({&f.h0.linear.weight, cls});
    track("stylized",
          testing::check_gradients(
              net, {f.part(0, 4, Domain::photo, 0, 0.5), f.part(4, 4, Domain::stylized, 0, 0.5)}, {},
              probes, 12));
  }
  {
    GradFixture f(3);
    Network net{&f.backbone, {&f.h0, &f.h1}, nullptr};
    auto probes = testing::backbone_probes(f.backbone, cls);
    probes.push_back({&f.h0.linear.weight, cls});
    probes.push_back({&f.h1.linear.weight, cls});
    track("multitask",
          testing::check_gradients(
              net, {f.part(0, 4, Domain::photo, 0, 0.5), f.part(4, 4, Domain::painting, 1, 0.5)}, {},
              probes, 13));
  }
  {
    GradFixture f(4);
    Network net{&f.backbone, {&f.h0}, nullptr};
    ObjectiveOptions options;
    options.backbone_grad = false;
    track("finetune", testing::check_gradients(net, {f.part(0, 8, Domain::photo, 0, 1.0)}, options,
                                               {{&f.h0.linear.weight, cls}, {&f.h0.linear.bias, cls}},
                                               14));
  }
  for (double lambda : {0.0, 0.5}) {
    GradFixture f(5);
    Network net{&f.backbone, {&f.h0}, &f.disc};
    ObjectiveOptions options;
    options.adversary_weight = lambda;
    options.use_discriminator = true;
    auto probes = testing::backbone_probes(f.backbone, testing::backbone_objective_of);
    probes.push_back({&f.h0.linear.weight, cls});
    for (auto* p : f.disc.params()) probes.push_back({p, testing::discriminator_of});
    track("adversarial",
          testing::check_gradients(
              net, {f.part(0, 4, Domain::photo, 0, 0.5), f.part(4, 4, Domain::painting, 0, 0.5)},
              options, probes, 15));
  }

  // Painting batches never touch the photo head.
  bool routing = true;
  {
    GradFixture f(6);
    Network net{&f.backbone, {&f.h0, &f.h1}, nullptr};
    net.zero_grad();
    evaluate_objective(net, {f.part(4, 4, Domain::painting, 1, 0.5)}, {}, true);
    routing = f.h0.linear.weight.grad.cwiseAbs().maxCoeff() == 0.0 &&
              f.h0.linear.bias.grad.cwiseAbs().maxCoeff() == 0.0;
    net.zero_grad();
    evaluate_objective(net, {f.part(0, 4, Domain::photo, 0, 0.5)}, {}, true);
    const nn::Matrix photo_only = f.h0.linear.weight.grad;
    net.zero_grad();
    evaluate_objective(
        net, {f.part(0, 4, Domain::photo, 0, 0.5), f.part(4, 4, Domain::painting, 1, 0.5)}, {}, true);
    routing = routing && f.h0.linear.weight.grad == photo_only;
  }

  const auto photos = testing::separable_toy(32, 8, 4);
  const auto paintings = testing::toy_paintings(32, 8, 5);
  const TrainingConfig cfg = testing::toy_config(4);
  const TrainedModel stage_one = train_finetuned(photos, paintings, cfg, 0);
  const TrainedModel refit = train_finetuned(photos, paintings, cfg, 3);
  const bool frozen = refit.backbone.hash() == stage_one.backbone.hash() &&
                      refit.hash() != stage_one.hash();

  const TrainedModel adv = train_domain_adversarial(photos, paintings, cfg, 0.0);
  const TrainedModel joint = train_joint({&photos, &paintings}, cfg);
  const bool zero_lambda = adv.backbone.hash() == joint.backbone.hash() &&
                           adv.head_n.linear.weight.value == joint.head_n.linear.weight.value &&
                           adv.head_n.linear.bias.value == joint.head_n.linear.bias.value;

  const auto random10 = testing::random_dataset(200, 10, 8, 15);
  Backbone backbone(cfg.backbone, cfg.seed);
  ClassifierHead head;
  head.linear = nn::Linear("head_n", backbone.feature_dim(), 10);
  Rng head_rng(derive_seed(cfg.seed, "head_n_init"));
  head.linear.init_normal(head_rng, 0.01);
  Network net{&backbone, {&head}, nullptr};
  BatchPart part;
  for (const auto& s : random10.samples()) {
    part.images.push_back(&s.pixels);
    part.labels.push_back(s.label);
    part.domains.push_back(s.domain);
  }
  const double init_loss = evaluate_objective(net, {part}, {}, false).classification;
  const double elapsed = seconds_since(t0);

  v.detail = fmt("worst gradient rel error %.3g", worst) + " (" + worst_where + ")" +
             ", routing " + (routing ? "exact" : "LEAKS") + ", finetune backbone " +
             (frozen ? "frozen bitwise" : "CHANGED") + ", lambda 0 " +
             (zero_lambda ? "== joint bitwise" : "DIFFERS from joint") +
             fmt(", init loss %.4f vs ln 10 = %.4f, %.1f s", init_loss, std::log(10.0), elapsed);
  require(v, worst < 1e-3, "gradient check");
  require(v, routing, "multitask routing");
  require(v, frozen, "finetune freeze");
  require(v, zero_lambda, "lambda 0 equivalence");
  require(v, std::abs(init_loss - std::log(10.0)) <= 0.1 * std::log(10.0), "initial loss");
  require(v, elapsed < 300.0, "runtime over 5 min");
  return v;
}

// -- 8 ---------------------------------------------------------------------

struct DeskSettings {
  int epochs = 30;
  double lr = 0.05;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

Verdict desk_direction(const DeskSettings& settings) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = desk(experiment::DeskDataOptions{});
  experiment::ExperimentData ed;
  ed.photos = data.photos;
  ed.paintings = data.paintings;
  ed.test = data.test;
  ed.ood = data.ood;
  ed.corrupted = corruptions::corrupt_dataset(data.test, corruptions::all_specs(), 0);

  experiment::ExperimentConfig config;
  config.training.epochs = settings.epochs;
  config.training.lr_drop_epoch = settings.epochs * 4 / 5;
  config.training.base_lr = settings.lr;
  config.training.dropped_lr = settings.lr / 10;

  struct Cell {
    std::string label, scheme, sources;
    stylization::PolicyKind policy;
  };
  const std::vector<Cell> cells = {
      {"baseline", "joint", "photos", stylization::PolicyKind::intradomain_unrestricted},
      {"intradomain", "stylized", "photos+stylized", stylization::PolicyKind::intradomain_unrestricted},
      {"intraclass", "stylized", "photos+stylized", stylization::PolicyKind::intradomain_intraclass},
      {"intradomain_lf", "joint", "photos+stylized_lf",
       stylization::PolicyKind::intradomain_unrestricted}};

  std::map<std::string, double> mca, noise;
  for (const Cell& c : cells) {
    experiment::CellSpec spec;
    spec.label = c.label;
    spec.scheme = c.scheme;
    spec.sources = c.sources;
    spec.policy.kind = c.policy;
    for (std::uint64_t seed : settings.seeds) {
      const auto r = experiment::run_cell(config, ed, spec, seed);
      mca[c.label] += r.report.mean_corruption_acc / settings.seeds.size();
      noise[c.label] += r.report.per_category.at("noise") / settings.seeds.size();
      std::cout << "  desk " << c.label << " seed " << seed
                << fmt(": clean %.2f, mean corruption %.2f, noise %.2f", 100 * r.report.clean_acc,
                       100 * r.report.mean_corruption_acc, 100 * r.report.per_category.at("noise"))
                << std::endl;
    }
  }

  const double gain = 100 * (mca["intradomain"] - mca["baseline"]);
  const double gain_intraclass = 100 * (mca["intraclass"] - mca["baseline"]);
  const double noise_gain = 100 * (noise["intradomain"] - noise["baseline"]);
  const double noise_gain_lf = 100 * (noise["intradomain_lf"] - noise["baseline"]);
  const double reduction = noise_gain > 0.0 ? 1.0 - noise_gain_lf / noise_gain : 0.0;
  const bool a = gain >= 1.0;
  const bool b = gain_intraclass < gain;
  const bool c = noise_gain > 0.0 && reduction >= 0.25;
  v.detail = fmt("(a) intradomain gain %+.2f pts (need >= 1.00) %s", gain, a ? "pass" : "FAIL") +
             fmt("; (b) intraclass gain %+.2f vs intradomain %+.2f %s", gain_intraclass, gain,
                 b ? "pass" : "FAIL") +
             fmt("; (c) noise gain %+.2f -> %+.2f with low-pass, reduction %.0f%% (need >= 25%%) %s",
                 noise_gain, noise_gain_lf, 100 * reduction, c ? "pass" : "FAIL") +
             fmt("; %zu seeds x 4 cells, %.0f s", settings.seeds.size(), seconds_since(t0));
  v.pass = a && b && c;
  return v;
}

// -- 9 ---------------------------------------------------------------------

Verdict sweep_rerun() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / ("styleshift_acceptance_" + hex64(Rng(9).next()));
  fs::create_directories(dir);

  experiment::DeskDataOptions options;
  options.resolution = 16;
  options.photos = 120;
  options.paintings = 40;
  options.test = 60;
  options.ood = 40;
  auto data = desk(options);
  save_manifest(data.photos, (dir / "photos.tsv").string());
  save_manifest(data.paintings, (dir / "paintings.tsv").string());
  save_manifest(data.test, (dir / "test.tsv").string());
  save_manifest(data.ood, (dir / "ood.tsv").string());

  training::TrainingConfig t;
  t.epochs = 3;
  t.lr_drop_epoch = 3;
  t.base_lr = 0.02;
  t.dropped_lr = 0.002;
  t.backbone = training::BackboneSpec::preset("resnet_micro");
  const nlohmann::json doc = {
      {"data",
       {{"photos", "photos.tsv"}, {"paintings", "paintings.tsv"}, {"test", "test.tsv"}, {"ood", "ood.tsv"}}},
      {"output_dir", "sweep"},
      {"training", training::to_json(t)},
      {"seeds", {0, 1}}};
  const auto config = experiment::experiment_config_from_json(doc, dir);
  const experiment::SweepSpec sweep{"style_policy", {"none", "intradomain", "intraclass"}};

  const auto first = experiment::run_sweep(config, sweep);
  const auto second = experiment::run_sweep(config, sweep);
  double worst = 0.0;
  std::size_t compared = 0;
  bool shape = first.rows.size() == second.rows.size();
  for (std::size_t r = 0; shape && r < first.rows.size(); ++r) {
    const auto& a = first.rows[r].reports;
    const auto& b = second.rows[r].reports;
    shape = a.size() == b.size() && a.size() == config.seeds.size();
    for (std::size_t k = 0; shape && k < a.size(); ++k) {
      const auto ma = evaluation::report_metrics(a[k]);
      const auto mb = evaluation::report_metrics(b[k]);
      for (const auto& [name, value] : ma) {
        worst = std::max(worst, std::abs(value - mb.at(name)));
        ++compared;
      }
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  v.detail = fmt("%zu metrics across 3 values x 2 seeds, max difference %.3g, ", compared, worst) +
             "summary hash " + first.summary_hash +
             (first.summary_hash == second.summary_hash ? " reproduced" : " CHANGED to " + second.summary_hash) +
             fmt(", %.1f s", seconds_since(t0));
  require(v, shape, "every cell ran in both sweeps");
  require(v, worst <= 1e-6, "metric reproduction");
  require(v, first.summary_hash == second.summary_hash, "summary hash");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Acceptance run: one verdict line per criterion"};
  std::vector<int> only;
  DeskSettings desk_settings;
  app.add_option("--only", only, "Run just these criteria (1-9)")->delimiter(',');
  app.add_option("--desk-epochs", desk_settings.epochs, "Epochs per desk training run");
  app.add_option("--desk-lr", desk_settings.lr, "Base learning rate for desk runs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"metric oracle", metric_oracle},
      {"table anchors", table_anchors},
      {"frequency oracle", frequency_oracle},
      {"stylizer identities", stylizer_identities},
      {"gram distance", gram_distance_checks},
      {"corruption suite", corruption_suite},
      {"training contracts", training_contracts},
      {"desk directional reproduction", [&] { return desk_direction(desk_settings); }},
      {"sweep rerun determinism", sweep_rerun}};

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw: ") + e.what();
    }
    failures += v.pass ? 0 : 1;
    std::cout << "criterion " << number << " (" << criteria[i].first
              << "): " << (v.pass ? "PASS" : "FAIL") << ": " << v.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
