// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Heavy criteria share two full pipeline runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "lmsrisk/cluster.hpp"
#include "lmsrisk/csv.hpp"
#include "lmsrisk/digest.hpp"
#include "lmsrisk/explain.hpp"
#include "lmsrisk/features.hpp"
#include "lmsrisk/metrics.hpp"
#include "lmsrisk/models.hpp"
#include "lmsrisk/pipeline.hpp"
#include "lmsrisk/random.hpp"
#include "lmsrisk/stats.hpp"
#include "lmsrisk/synthetic.hpp"

namespace {

using namespace lmsrisk;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(const char* id, const char* title, Outcome& o) {
  std::printf("%s %s: %s.%s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.str().c_str());
  std::fflush(stdout);
  failures += !o.pass;
}

template <typename F>
void run_criterion(const char* id, const char* title, F&& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  report(id, title, o);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fix(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<FeatureVector> uniform_rows(std::size_t n, Rng& rng) {
  std::vector<FeatureVector> out(n);
  for (auto& r : out) r = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
  return out;
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

double mann_whitney(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Shapley values by averaging marginal contributions over all 24 orderings;
// coalition values come from direct predictions on hybrid rows.
FeatureVector permutation_shapley(const Predictor& model, const FeatureVector& x, const std::vector<FeatureVector>& bg) {
  std::array<double, 16> v{};
  std::vector<FeatureVector> hybrids(bg.size());
  std::vector<double> out(bg.size());
  for (unsigned mask = 0; mask < 16; ++mask) {
    for (std::size_t b = 0; b < bg.size(); ++b) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) hybrids[b][f] = (mask >> f) & 1u ? x[f] : bg[b][f];
    }
    model.predict(hybrids, out);
    v[mask] = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(bg.size());
  }
  std::array<int, 4> order{0, 1, 2, 3};
  FeatureVector phi{};
  int count = 0;
  do {
    unsigned mask = 0;
    for (int f : order) {
      const unsigned next = mask | (1u << f);
      phi[f] += v[next] - v[mask];
      mask = next;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& p : phi) p /= count;
  return phi;
}

double sse(const std::vector<FeatureVector>& pts, const std::vector<int>& labels, int k) {
  std::vector<FeatureVector> mean(k, FeatureVector{});
  std::vector<int> count(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    count[labels[i]]++;
    for (std::size_t f = 0; f < kNumFeatures; ++f) mean[labels[i]][f] += pts[i][f];
  }
  for (int c = 0; c < k; ++c) {
    for (double& m : mean[c]) m /= std::max(1, count[c]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) s += (pts[i][f] - mean[labels[i]][f]) * (pts[i][f] - mean[labels[i]][f]);
  }
  return s;
}

double pooled_t(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  const double ma = mean(a), mb = mean(b);
  double ss = 0.0;
  for (double x : a) ss += (x - ma) * (x - ma);
  for (double x : b) ss += (x - mb) * (x - mb);
  const double sp2 = ss / static_cast<double>(a.size() + b.size() - 2);
  return (ma - mb) / std::sqrt(sp2 * (1.0 / static_cast<double>(a.size()) + 1.0 / static_cast<double>(b.size())));
}

// Two-sided pooled t-test p-value via the regularized incomplete beta
// function evaluated by Simpson integration of the t density.
double t_two_sided_p(double t, double df) {
  // P(|T| > t) = 1 - 2 * integral_0^t density.
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto density = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double h = t / n;
  double s = density(0) + density(t);
  for (int i = 1; i < n; ++i) s += density(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

double ols_r_squared(const std::vector<std::vector<double>>& cols, std::size_t target) {
  const std::size_t n = cols[0].size();
  std::vector<std::vector<double>> a;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r{1.0};
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j != target) r.push_back(cols[j][i]);
    }
    a.push_back(r);
  }
  const std::size_t p = a[0].size();
  std::vector<std::vector<double>> m(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) m[r][c] += a[i][r] * a[i][c];
      m[r][p] += a[i][r] * cols[target][i];
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k <= p; ++k) m[r][k] -= f * m[c][k];
    }
  }
  double mean = 0.0;
  for (double v : cols[target]) mean += v / static_cast<double>(n);
  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t c = 0; c < p; ++c) fit += a[i][c] * m[c][p] / m[c][c];
    ssr += (cols[target][i] - fit) * (cols[target][i] - fit);
    sst += (cols[target][i] - mean) * (cols[target][i] - mean);
  }
  return 1.0 - ssr / sst;
}

// ---------------------------------------------------------------------------
// Shared pipeline runs
// ---------------------------------------------------------------------------

struct PipelineRun {
  fs::path dir;
  double seconds = 0.0;
  json manifest;
};

PipelineRun run_desk_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  PipelineConfig config;
  config.seed = 0;
  config.synthetic = SyntheticConfig{};  // seed 0, 5,000 students, 10% label noise
  config.output_dir = dir;
  const auto t0 = Clock::now();
  run_pipeline(config);
  PipelineRun r{dir, seconds_since(t0), json::parse(csv::read_text(dir / artifacts::kManifest))};
  return r;
}

std::map<std::string, std::string> json_digests(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (e.is_regular_file() && rel != artifacts::kManifest && e.path().extension() == ".json") out[rel] = sha256_file(e.path());
  }
  return out;
}

}  // namespace

int main() {
  std::printf("lmsrisk acceptance (tool %s)\n", kToolVersion);
  std::fflush(stdout);

  // Two identical desk-scale runs feed AC1, AC2, AC3 and AC10.
  std::optional<PipelineRun> run_a, run_b;
  std::string pipeline_error;
  try {
    run_a = run_desk_pipeline("acceptance_run_a");
    std::printf("info: pipeline run A finished in %.1f s\n", run_a->seconds);
    std::fflush(stdout);
    run_b = run_desk_pipeline("acceptance_run_b");
    std::printf("info: pipeline run B finished in %.1f s\n", run_b->seconds);
  } catch (const std::exception& e) {
    pipeline_error = e.what();
    std::printf("info: pipeline run failed: %s\n", e.what());
  }
  std::fflush(stdout);
  auto need_run = [&](Outcome& o) {
    if (!run_a) throw std::runtime_error("pipeline run unavailable: " + pipeline_error);
    (void)o;
  };

  run_criterion("AC1", "Shapley exactness on 200 instances for all seven families", [&](Outcome& o) {
    need_run(o);
    Rng rng(derive_seed(1, "acceptance.ac1"));
    const auto instances = uniform_rows(200, rng);
    const auto background = uniform_rows(100, rng);
    double worst_efficiency = 0.0, worst_permutation = 0.0, shap_seconds = 0.0;
    for (Family f : kAllFamilies) {
      const TrainedModel model = TrainedModel::load(run_a->dir / artifacts::model(f));
      const auto t0 = Clock::now();
      const ShapReport r = summarize(model, instances, background, std::string(to_string(f)));
      shap_seconds += seconds_since(t0);
      const auto direct = predict_proba(model, instances);
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const double total = r.baseline + std::accumulate(r.phi[i].begin(), r.phi[i].end(), 0.0);
        worst_efficiency = std::max(worst_efficiency, std::abs(total - direct[i]));
        const FeatureVector oracle = permutation_shapley(model, instances[i], background);
        for (std::size_t j = 0; j < kNumFeatures; ++j) {
          worst_permutation = std::max(worst_permutation, std::abs(oracle[j] - r.phi[i][j]));
        }
      }
    }
    o.detail << " max |baseline + sum(phi) - f(x)| = " << sci(worst_efficiency)
             << ", max |enumeration - permutation| = " << sci(worst_permutation) << ", attribution time "
             << fix(shap_seconds, 1) << " s";
    o.require(worst_efficiency < 1e-9, "efficiency < 1e-9");
    o.require(worst_permutation < 1e-10, "permutation agreement < 1e-10");
    o.require(shap_seconds < 60.0, "runtime < 60 s");
  });

  run_criterion("AC2", "planted importance: assignment submissions ranks first", [&](Outcome& o) {
    need_run(o);
    const json table = json::parse(csv::read_text(run_a->dir / artifacts::kRankTable));
    int assignment_first = 0, time_first = 0, families = 0;
    std::string ranks;
    for (const auto& row : table.at("rows")) {
      std::vector<double> rank;
      for (auto name : kFeatureNames) rank.push_back(row.at("rank").at(std::string(name)).get<double>());
      ++families;
      assignment_first += rank[kAssignmentSubmissions] == 1.0;
      time_first += rank[kTimeInContent] == 1.0;
      std::string r;
      for (double v : rank) r += std::to_string(static_cast<int>(v));
      ranks += " " + row.at("model").get<std::string>() + "=" + r;
    }
    const json& stages = run_a->manifest.at("stages");
    const double runtime = stages.at("train").at("seconds").get<double>() + stages.at("explain").at("seconds").get<double>();
    o.detail << " assignment first in " << assignment_first << "/" << families << ", time-in-content first in "
             << time_first << ";" << ranks << "; train+explain " << fix(runtime, 1) << " s";
    o.require(families == 7, "seven families explained");
    o.require(assignment_first >= 6, "assignment submissions rank 1 for >= 6 families");
    o.require(time_first == 0, "time in content never rank 1");
    o.require(runtime < 600.0, "runtime < 10 min");
  });

  run_criterion("AC3", "tree families reach 0.90 accuracy and AUC; forest AUC >= logistic AUC", [&](Outcome& o) {
    need_run(o);
    std::map<std::string, std::pair<double, double>> m;
    for (Family f : kAllFamilies) {
      const json ev = json::parse(csv::read_text(run_a->dir / artifacts::metrics(f))).at("evaluation");
      m[std::string(to_string(f))] = {ev.at("accuracy").get<double>(), ev.at("auc").is_null() ? 0.0 : ev.at("auc").get<double>()};
    }
    for (const char* name : {"decision_tree", "random_forest", "gradient_boosting", "logistic_regression"}) {
      o.detail << " " << name << " acc " << fix(m[name].first) << " auc " << fix(m[name].second) << ";";
    }
    for (const char* name : {"decision_tree", "random_forest", "gradient_boosting"}) {
      o.require(m[name].first >= 0.90, std::string(name) + " accuracy >= 0.90");
      o.require(m[name].second >= 0.90, std::string(name) + " AUC >= 0.90");
    }
    o.require(m["random_forest"].second >= m["logistic_regression"].second, "forest AUC >= logistic AUC");
  });

  run_criterion("AC4", "trapezoidal AUC equals Mann-Whitney on 1,000 tied score vectors", [](Outcome& o) {
    Rng rng(derive_seed(4, "acceptance.ac4"));
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 2 + rng.index(199);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.index(1 + rng.index(30))) / 7.0;
        y[i] = rng.bernoulli(0.1 + 0.8 * rng.uniform());
      }
      y[0] = 1;
      y[n - 1] = 0;
      worst = std::max(worst, std::abs(roc_auc(s, y) - mann_whitney(s, y)));
    }
    o.detail << " max difference " << sci(worst);
    o.require(worst < 1e-12, "difference < 1e-12");
  });

  run_criterion("AC5", "analytic gradients match central differences", [](Outcome& o) {
    Rng rng(derive_seed(5, "acceptance.ac5"));
    Dataset d;
    for (const auto& x : uniform_rows(80, rng)) {
      d.x.push_back(x);
      d.y.push_back(x[1] + 0.3 * rng.normal() < 0.5);
    }
    // Relative error of the whole gradient vector: |g - fd| / max(|g|, |fd|).
    auto rel = [](const std::vector<double>& g, const std::vector<double>& fd) {
      double diff = 0.0, ng = 0.0, nf = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        diff += (g[k] - fd[k]) * (g[k] - fd[k]);
        ng += g[k] * g[k];
        nf += fd[k] * fd[k];
      }
      return std::sqrt(diff) / std::max({std::sqrt(ng), std::sqrt(nf), 1e-300});
    };
    double worst_lr = 0.0;
    for (int point = 0; point < 20; ++point) {
      LogisticParams p;
      for (double& v : p) v = rng.uniform(-3, 3);
      const double c = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
      const auto g = logistic_gradient(p, d, c);
      std::vector<double> fd(p.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
        LogisticParams up = p, down = p;
        up[k] += h;
        down[k] -= h;
        fd[k] = (logistic_objective(up, d, c) - logistic_objective(down, d, c)) / (2 * h);
      }
      worst_lr = std::max(worst_lr, rel(std::vector<double>(g.begin(), g.end()), fd));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), 4);
    Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (int f = 0; f < 4; ++f) x(static_cast<Eigen::Index>(i), f) = d.x[i][f];
      y(static_cast<Eigen::Index>(i)) = d.y[i];
    }
    double worst_nn = 0.0;
    for (int point = 0; point < 20; ++point) {
      // The default (100, 100) architecture; every parameter is checked.
      MlpModel m = init_mlp({100, 100}, derive_seed(5, "acceptance.ac5.mlp", static_cast<std::uint64_t>(point)));
      Eigen::VectorXd params = m.flatten();
      for (Eigen::Index k = 0; k < params.size(); ++k) params(k) += rng.uniform(-0.1, 0.1);
      m.unflatten(params);
      Eigen::VectorXd grad;
      mlp_loss_and_gradient(m, x, y, 0.1, &grad);
      std::vector<double> g(grad.data(), grad.data() + grad.size()), fd(static_cast<std::size_t>(params.size()));
      MlpModel probe = m;
      for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double h = 1e-6;
        Eigen::VectorXd pu = params, pd = params;
        pu(k) += h;
        pd(k) -= h;
        probe.unflatten(pu);
        const double up = mlp_loss_and_gradient(probe, x, y, 0.1, nullptr);
        probe.unflatten(pd);
        const double down = mlp_loss_and_gradient(probe, x, y, 0.1, nullptr);
        fd[static_cast<std::size_t>(k)] = (up - down) / (2 * h);
      }
      worst_nn = std::max(worst_nn, rel(g, fd));
    }
    o.detail << " logistic max relative error " << sci(worst_lr) << ", neural network " << sci(worst_nn);
    o.require(worst_lr < 1e-5, "logistic relative error < 1e-5");
    o.require(worst_nn < 1e-5, "neural network relative error < 1e-5");
  });

  run_criterion("AC6", "k-means matches the exhaustive 2-partition optimum; Lloyd traces monotone", [](Outcome& o) {
    Rng rng(derive_seed(6, "acceptance.ac6"));
    int exact = 0, traces = 0, non_monotone = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.index(7);
      const auto pts = uniform_rows(n, rng);
      const ClusterModel m = kmeans_fit(pts, 2, rng.next_u64());
      double best = std::numeric_limits<double>::infinity();
      for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
        best = std::min(best, sse(pts, labels, 2));
      }
      exact += sse(pts, m.assignments, 2) == best;
      for (const auto& t : m.traces) {
        ++traces;
        for (std::size_t i = 1; i < t.inertia.size(); ++i) non_monotone += t.inertia[i] > t.inertia[i - 1];
      }
    }
    // Larger runs exercise longer traces.
    for (int trial = 0; trial < 20; ++trial) {
      const auto pts = uniform_rows(400, rng);
      const ClusterModel m = kmeans_fit(pts, 2 + trial % 9, rng.next_u64());
      for (const auto& t : m.traces) {
        ++traces;
        for (std::size_t i = 1; i < t.inertia.size(); ++i) non_monotone += t.inertia[i] > t.inertia[i - 1];
      }
    }
    o.detail << " optimal partition in " << exact << "/50 instances; " << non_monotone << " increases across "
             << traces << " logged runs";
    o.require(exact == 50, "all 50 instances optimal");
    o.require(non_monotone == 0, "monotone inertia");
  });

  auto blob_points = [](const std::vector<FeatureVector>& centers, std::size_t per, double sd, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FeatureVector> pts;
    for (const auto& c : centers) {
      for (std::size_t i = 0; i < per; ++i) {
        pts.push_back({c[0] + sd * rng.normal(), c[1] + sd * rng.normal(), c[2] + sd * rng.normal(), c[3] + sd * rng.normal()});
      }
    }
    return pts;
  };

  run_criterion("AC7", "elbow picks 4 on planted 4-blob data; silhouette picks 2 on 2-blob data", [&](Outcome& o) {
    const auto four = blob_points({{0.2, 0.2, 0.2, 0.2}, {0.8, 0.2, 0.8, 0.2}, {0.2, 0.8, 0.2, 0.8}, {0.8, 0.8, 0.8, 0.8}},
                                  250, 0.07, derive_seed(7, "acceptance.ac7.four"));
    const auto two = blob_points({{0.25, 0.3, 0.25, 0.3}, {0.75, 0.7, 0.75, 0.7}}, 500, 0.08,
                                 derive_seed(7, "acceptance.ac7.two"));
    const KSelection s4 = select_k(four, 1, 10, derive_seed(7, "acceptance.ac7.fit4"));
    const KSelection s2 = select_k(two, 1, 10, derive_seed(7, "acceptance.ac7.fit2"));
    o.detail << " elbow k = " << s4.elbow.chosen_k << ", silhouette k = " << s2.silhouette.chosen_k;
    o.require(s4.elbow.chosen_k == 4, "elbow chooses 4");
    o.require(s2.silhouette.chosen_k == 2, "silhouette chooses 2");
  });

  run_criterion("AC8", "ANOVA and studentized range identities", [](Outcome& o) {
    Rng rng(derive_seed(8, "acceptance.ac8"));
    auto draw = [&](std::size_t n, double mu, double sd) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.normal(mu, sd);
      return v;
    };
    double worst_ft = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = draw(2 + rng.index(30), 0, 1), b = draw(2 + rng.index(30), rng.uniform(-1, 1), rng.uniform(0.3, 3));
      const double t = pooled_t(a, b);
      worst_ft = std::max(worst_ft, std::abs(anova_oneway({a, b}).f - t * t) / std::max(1.0, t * t));
    }
    double worst_t = 0.0;
    for (double df : {3.0, 10.0, 40.0, 200.0}) {
      for (double q : {0.5, 1.5, 2.5, 3.5, 5.0}) {
        const double expected = 1.0 - t_two_sided_p(q / std::sqrt(2.0), df);
        worst_t = std::max(worst_t, std::abs(studentized_range_cdf(q, 2, df) - expected));
      }
    }
    const int reps = 1'000'000;
    int hits = 0;
    for (int r = 0; r < reps; ++r) {
      double lo = 1e300, hi = -1e300;
      for (int i = 0; i < 3; ++i) {
        const double z = rng.normal();
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
      double chi2 = 0.0;
      for (int i = 0; i < 20; ++i) {
        const double z = rng.normal();
        chi2 += z * z;
      }
      hits += (hi - lo) / std::sqrt(chi2 / 20.0) <= 3.0;
    }
    const double mc = static_cast<double>(hits) / reps, exact = studentized_range_cdf(3.0, 3, 20);
    double worst_affine = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::vector<double>> g{draw(10, 0, 1), draw(7, 0.4, 1), draw(12, -0.2, 1.5)};
      const double a = rng.uniform(0.1, 20) * (rng.bernoulli(0.5) ? 1 : -1), b = rng.uniform(-50, 50);
      auto h = g;
      for (auto& grp : h) {
        for (double& x : grp) x = a * x + b;
      }
      const AnovaResult r1 = anova_oneway(g), r2 = anova_oneway(h);
      worst_affine = std::max({worst_affine, std::abs(r1.f - r2.f) / std::max(1.0, r1.f), std::abs(r1.p_value - r2.p_value)});
    }
    o.detail << " max |F - t^2| (relative) " << sci(worst_ft) << "; k = 2 t identity max error " << sci(worst_t)
             << "; CDF(3.0; 3, 20) = " << fix(exact, 5) << " vs Monte Carlo " << fix(mc, 5) << "; affine max change "
             << sci(worst_affine);
    o.require(worst_ft < 1e-9, "F = t^2 to 1e-9");
    o.require(worst_t < 1e-6, "t identity to 1e-6");
    o.require(std::abs(mc - exact) <= 0.003, "Monte Carlo within 0.003");
    o.require(worst_affine < 1e-9, "affine invariance to 1e-9");
  });

  run_criterion("AC9", "VIF matches normal-equations OLS; orthogonal = 1; dependency infinite", [](Outcome& o) {
    Rng rng(derive_seed(9, "acceptance.ac9"));
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXd x(200, 4);
      std::vector<std::vector<double>> cols(4, std::vector<double>(200));
      const double mix = rng.uniform(0, 0.9);
      for (int i = 0; i < 200; ++i) {
        const double z = rng.normal();
        for (int j = 0; j < 4; ++j) {
          x(i, j) = (1 - mix) * rng.normal() + mix * z + rng.uniform(-2, 2) * (j == 3);
          cols[j][i] = x(i, j);
        }
      }
      const VifReport r = compute_vif(x);
      for (std::size_t j = 0; j < 4; ++j) worst = std::max(worst, std::abs(r.vif[j] - 1.0 / (1.0 - ols_r_squared(cols, j))));
    }
    Eigen::MatrixXd orth(16, 4);
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 4; ++j) orth(i, j) = (i >> j) & 1 ? 2.5 : -0.5;
    }
    double worst_orth = 0.0;
    for (double v : compute_vif(orth).vif) worst_orth = std::max(worst_orth, std::abs(v - 1.0));
    Eigen::MatrixXd dep(100, 4);
    for (int i = 0; i < 100; ++i) {
      dep(i, 0) = rng.normal();
      dep(i, 1) = rng.normal();
      dep(i, 2) = 2 * dep(i, 0) - dep(i, 1) + 1;
      dep(i, 3) = rng.normal();
    }
    const VifReport d = compute_vif(dep);
    const bool flagged = d.is_infinite(0) && d.is_infinite(1) && d.is_infinite(2) && !d.is_infinite(3);
    o.detail << " max |VIF - oracle| " << sci(worst) << "; orthogonal max |VIF - 1| " << sci(worst_orth)
             << "; dependency flagged " << (flagged ? "yes" : "no");
    o.require(worst < 1e-8, "oracle agreement 1e-8");
    o.require(worst_orth < 1e-9, "orthogonal VIF = 1");
    o.require(flagged, "dependency infinite");
  });

  run_criterion("AC10", "two full runs give byte-identical JSON and identical manifest digests", [&](Outcome& o) {
    need_run(o);
    if (!run_b) throw std::runtime_error("second run unavailable");
    const auto da = json_digests(run_a->dir), db = json_digests(run_b->dir);
    std::size_t differing = 0;
    for (const auto& [rel, sha] : da) differing += !db.contains(rel) || db.at(rel) != sha;
    differing += db.size() > da.size() ? db.size() - da.size() : 0;
    const bool manifests = run_a->manifest.at("artifacts") == run_b->manifest.at("artifacts") &&
                           run_a->manifest.at("config_hash") == run_b->manifest.at("config_hash");
    o.detail << " " << da.size() << " JSON artifacts, " << differing << " differ; manifest digests "
             << (manifests ? "identical" : "differ") << "; runtimes " << fix(run_a->seconds, 1) << " s and "
             << fix(run_b->seconds, 1) << " s";
    o.require(differing == 0, "identical JSON");
    o.require(manifests, "identical manifest digests");
    o.require(run_a->seconds < 900.0 && run_b->seconds < 900.0, "runtime < 15 min");
  });

  run_criterion("AC11", "cluster profiling recovers planted centroids; ANOVA flags assignments", [](Outcome& o) {
    SyntheticConfig c;
    c.seed = 11;
    c.n_students = 4000;
    c.n_sections = 4;
    c.cluster_weights = {0.25, 0.25, 0.25, 0.25};
    c.cluster_centroids = {{{0.85, 0.85, 0.85, 0.85}, {0.85, 0.85, 0.15, 0.15}, {0.15, 0.85, 0.15, 0.85}, {0.15, 0.15, 0.15, 0.15}}};
    c.feature_noise_sd = 0.06;  // nearest centroids are 0.7 = 11.7 SD apart
    c.grade_intercept = 0.0;
    c.label_noise_rate = 0.0;
    const SyntheticCohort syn = generate_synthetic(c);
    const CohortTable cohort = filter_courses(syn.cohort);
    auto [complete, dropped] = retain_complete_rows(cohort, select_features(cohort));
    const LabelResult labels = label(complete, normalize_per_section(complete));
    std::vector<FeatureVector> pts;
    std::vector<double> grades;
    for (const auto& inst : labels.instances) {
      pts.push_back(inst.features);
      grades.push_back(inst.final_grade);
    }
    const ClusterModel m = kmeans_fit(pts, 4, derive_seed(11, "acceptance.ac11"));
    const ClusterSummary s = summarize_clusters(m, pts, grades);
    // Planted clusters in descending expected grade (weights . centroid).
    std::vector<std::pair<double, FeatureVector>> planted;
    for (const auto& centroid : c.cluster_centroids) {
      double g = 0.0;
      for (std::size_t f = 0; f < kNumFeatures; ++f) g += c.grade_weights[f] * centroid[f];
      planted.emplace_back(g, centroid);
    }
    std::sort(planted.begin(), planted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) worst = std::max(worst, std::abs(s.clusters[i].mean[f] - planted[i].second[f]));
    }
    std::vector<double> assignments;
    for (const auto& p : pts) assignments.push_back(p[kAssignmentSubmissions]);
    const AnovaResult a = anova_oneway(group_values(s, m, assignments));
    o.detail << " max |recovered - planted| " << fix(worst, 4) << "; assignment ANOVA F = " << fix(a.f, 1)
             << ", p = " << sci(a.p_value);
    o.require(worst <= 0.05, "means within 0.05");
    o.require(a.p_value < 0.05, "assignment submissions significant");
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures ? 1 : 0;
}
