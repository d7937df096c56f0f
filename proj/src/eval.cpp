#include "gambo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gambo {

std::vector<std::size_t> select_top_k(const std::vector<EvalRecord>& records, int k) {
  if (k <= 0) throw std::invalid_argument("select_top_k: k must be positive");
  if (static_cast<std::size_t>(k) > records.size()) throw std::invalid_argument("select_top_k: k exceeds record count");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return records[a].y > records[b].y; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::vector<std::size_t> select_top_k(const Trajectory& traj, int k) { return select_top_k(traj.records, k); }

double oracle_eval(const Task& task, const std::vector<VectorXd>& designs) {
  if (designs.empty()) throw std::invalid_argument("oracle_eval: no designs");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : designs) best = std::max(best, task.oracle(task.decode(z)));
  return best;
}

double percentile_design_eval(const std::vector<EvalRecord>& records, const Task& task, double pct) {
  if (records.empty()) throw std::invalid_argument("percentile_design_eval: no records");
  if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return records[a].y < records[b].y; });
  auto idx = static_cast<std::size_t>(std::floor(pct / 100.0 * static_cast<double>(records.size() - 1)));
  // pct = 100 must land on the top-1 record, which is the earliest of the
  // maximal scores, not the last one in ascending order.
  if (idx + 1 == records.size()) return oracle_eval(task, {records[select_top_k(records, 1)[0]].z});
  return oracle_eval(task, {records[order[idx]].z});
}

namespace {
MatrixXd double_centered(const VectorXd& a) {
  const Eigen::Index n = a.size();
  MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = std::abs(a(i) - a(j));
  const VectorXd row = D.rowwise().mean();
  const VectorXd col = D.colwise().mean().transpose();
  const double all = D.mean();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) += all - row(i) - col(j);
  return D;
}
}  // namespace

double distance_covariance(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("distance_covariance: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("distance_covariance: need at least two samples");
  const MatrixXd A = double_centered(a);
  const MatrixXd B = double_centered(b);
  const double n = static_cast<double>(a.size());
  const double v2 = A.cwiseProduct(B).sum() / (n * n);
  return std::sqrt(std::max(v2, 0.0));
}

std::vector<double> budget_curve(const std::vector<EvalRecord>& records, const Task& task, const std::vector<int>& ks) {
  if (!std::is_sorted(ks.begin(), ks.end())) throw std::invalid_argument("budget_curve: ks must be ascending");
  const int n = static_cast<int>(records.size());
  const std::vector<std::size_t> order = select_top_k(records, n);
  std::vector<double> out;
  out.reserve(ks.size());
  double best = -std::numeric_limits<double>::infinity();
  int done = 0;
  for (int k : ks) {
    if (k <= 0) throw std::invalid_argument("budget_curve: k must be positive");
    const int upto = std::min(k, n);
    for (; done < upto; ++done) {
      const auto& z = records[order[static_cast<std::size_t>(done)]].z;
      best = std::max(best, task.oracle(task.decode(z)));
    }
    out.push_back(best);
  }
  return out;
}

std::vector<int> default_budget_ks(int n) {
  std::vector<int> ks;
  for (int k = 1; k < n; k *= 2) ks.push_back(k);
  if (n > 0) ks.push_back(n);
  return ks;
}

std::vector<std::vector<EvalRecord>> split_by_condition(const Trajectory& traj) {
  int max_c = -1;
  for (const auto& r : traj.records) max_c = std::max(max_c, r.condition);
  std::vector<std::vector<EvalRecord>> out(static_cast<std::size_t>(max_c + 1));
  for (const auto& r : traj.records) out[static_cast<std::size_t>(r.condition)].push_back(r);
  std::erase_if(out, [](const auto& v) { return v.empty(); });
  return out;
}

SeedScores score_trajectory(const Trajectory& traj, const Task& task, const std::string& method, std::uint64_t seed) {
  const auto groups = split_by_condition(traj);
  if (groups.empty()) throw std::invalid_argument("score_trajectory: empty trajectory");
  SeedScores s{method, task.name(), seed, 0.0, 0.0, 0.0};
  for (const auto& g : groups) {
    const auto pick = [&](int k) {
      std::vector<VectorXd> zs;
      for (std::size_t i : select_top_k(g, std::min<int>(k, static_cast<int>(g.size())))) zs.push_back(g[i].z);
      return oracle_eval(task, zs);
    };
    s.top1 += pick(1);
    s.top128 += pick(128);
    s.p90 += percentile_design_eval(g, task, 90.0);
  }
  const double n = static_cast<double>(groups.size());
  s.top1 /= n;
  s.top128 /= n;
  s.p90 /= n;
  return s;
}

std::vector<double> condition_mean_curve(const Trajectory& traj, const Task& task, const std::vector<int>& ks) {
  const auto groups = split_by_condition(traj);
  std::vector<double> sum(ks.size(), 0.0);
  for (const auto& g : groups) {
    const auto c = budget_curve(g, task, ks);
    for (std::size_t i = 0; i < c.size(); ++i) sum[i] += c[i];
  }
  for (double& v : sum) v /= static_cast<double>(groups.size());
  return sum;
}

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::vector<MethodSummary> summarize(const std::vector<SeedScores>& rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    std::pair<std::string, std::string> key{r.method, r.task};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<MethodSummary> out;
  for (const auto& [method, task] : keys) {
    std::vector<double> t1, t128, p90;
    for (const auto& r : rows)
      if (r.method == method && r.task == task) {
        t1.push_back(r.top1);
        t128.push_back(r.top128);
        p90.push_back(r.p90);
      }
    out.push_back({method, task, static_cast<int>(t1.size()), mean_std(t1), mean_std(t128), mean_std(p90)});
  }
  return out;
}

std::vector<RankRow> rank_table(const std::vector<MethodSummary>& summaries) {
  std::vector<std::string> methods, tasks;
  for (const auto& s : summaries) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end()) tasks.push_back(s.task);
  }
  if (methods.size() < 2) throw std::invalid_argument("rank_table: need at least two methods");
  std::vector<RankRow> rows;
  for (const auto& m : methods) rows.push_back({m, {}, 0.0});
  for (const auto& task : tasks) {
    std::vector<std::pair<double, std::size_t>> entries;
    for (const auto& s : summaries)
      if (s.task == task) {
        const auto it = std::find(methods.begin(), methods.end(), s.method);
        entries.push_back({s.top1.mean, static_cast<std::size_t>(it - methods.begin())});
      }
    std::sort(entries.begin(), entries.end(), [](auto a, auto b) { return a.first > b.first; });
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      while (j < entries.size() && entries[j].first == entries[i].first) ++j;
      const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
      for (std::size_t q = i; q < j; ++q) rows[entries[q].second].per_task[task] = rank;
      i = j;
    }
  }
  for (auto& r : rows) {
    double sum = 0.0;
    for (const auto& [task, rank] : r.per_task) sum += rank;
    r.average = r.per_task.empty() ? 0.0 : sum / static_cast<double>(r.per_task.size());
  }
  return rows;
}

}  // namespace gambo
