#include "anchorpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "anchorpose/error.hpp"
#include "anchorpose/solver.hpp"

namespace anchorpose {

namespace {

void require_points(const std::vector<Vec3>& points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyModel, "metric over an empty model");
}

std::vector<Vec3> transformed(const std::vector<Vec3>& points, const Pose& pose) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(pose.apply(p));
  return out;
}

double nearest_exact(const Vec3& q, const std::vector<Vec3>& targets) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& t : targets) best = std::min(best, (q - t).squaredNorm());
  return best;
}

// Exact nearest-neighbor index over a fixed target cloud: a k-d tree whose
// nodes keep their bounding boxes, so whole subtrees are skipped once their
// box is farther than the best match so far. Queries return exactly the
// minimum squared distance a full scan returns.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& targets) : targets_(targets), order_(targets.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * targets.size() / kLeafSize + 2);
    build(0, order_.size());
  }

  double nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    Vec3 lo, hi;
    std::size_t begin = 0, end = 0;
    std::size_t left = 0, right = 0;  // 0 marks a leaf (the root is never a child)
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Vec3 lo = targets_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(targets_[order_[i]]);
      hi = hi.cwiseMax(targets_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin > kLeafSize) {
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) { return targets_[a][axis] < targets_[b][axis]; });
      const std::size_t left = build(begin, mid);
      const std::size_t right = build(mid, end);
      nodes_[id].left = left;
      nodes_[id].right = right;
    }
    return id;
  }

  static double box_gap_sq(const Node& n, const Vec3& q) {
    double g = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = std::max({0.0, n.lo[a] - q[a], q[a] - n.hi[a]});
      g += d * d;
    }
    return g;
  }

  void search(std::size_t id, const Vec3& q, double& best) const {
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        best = std::min(best, (q - targets_[order_[i]]).squaredNorm());
      }
      return;
    }
    const double gl = box_gap_sq(nodes_[n.left], q);
    const double gr = box_gap_sq(nodes_[n.right], q);
    const std::size_t first = gl <= gr ? n.left : n.right;
    const std::size_t second = gl <= gr ? n.right : n.left;
    if (std::min(gl, gr) <= best) search(first, q, best);
    if (std::max(gl, gr) <= best) search(second, q, best);
  }

  const std::vector<Vec3>& targets_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double add_metric(const std::vector<Vec3>& points, const Pose& pred, const Pose& gt) {
  require_points(points);
  // Differencing the transforms first keeps a pure translation exact: every
  // term is then |t - t*| bit for bit, and a running mean of equal terms
  // returns that value unchanged.
  const Mat3 dr = pred.rotation - gt.rotation;
  const Vec3 dt = pred.translation - gt.translation;
  double mean = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mean += ((dr * points[i] + dt).norm() - mean) / static_cast<double>(i + 1);
  }
  return mean;
}

double add_metric(const ObjectModel& model, const Pose& pred, const Pose& gt) {
  return add_metric(model.points(), pred, gt);
}

double adds_metric(const std::vector<Vec3>& points, const Pose& pred, const Pose& gt,
                   NearestSearch search) {
  require_points(points);
  const std::vector<Vec3> queries = transformed(points, pred);
  const std::vector<Vec3> targets = transformed(points, gt);
  if (search == NearestSearch::kAuto) {
    search = points.size() > 256 ? NearestSearch::kTree : NearestSearch::kExact;
  }
  double sum = 0.0;
  if (search == NearestSearch::kTree) {
    const KdTree tree(targets);
    for (const Vec3& q : queries) sum += std::sqrt(tree.nearest_sq(q));
  } else {
    for (const Vec3& q : queries) sum += std::sqrt(nearest_exact(q, targets));
  }
  return sum / static_cast<double>(points.size());
}

double adds_metric(const ObjectModel& model, const Pose& pred, const Pose& gt,
                   NearestSearch search) {
  return adds_metric(model.points(), pred, gt, search);
}

double add_auc(const std::vector<double>& distances, double max_threshold) {
  if (distances.empty()) throw Error(ErrorCode::kEmptyInput, "AUC of no distances");
  if (!(max_threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "AUC threshold must be > 0");
  double sum = 0.0;
  for (double d : distances) {
    if (!std::isfinite(d) || d < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "AUC distances must be finite and >= 0");
    }
    sum += std::max(0.0, (max_threshold - std::min(d, max_threshold)) / max_threshold);
  }
  return sum / static_cast<double>(distances.size());
}

double add_or_adds(const EvalRecord& record) { return record.symmetric ? record.add_s : record.add; }

bool add_01d(const EvalRecord& record) {
  if (!(record.diameter > 0.0)) throw Error(ErrorCode::kZeroDiameter, "object diameter is zero");
  return add_or_adds(record) < 0.1 * record.diameter;
}

bool deg_cm(const EvalRecord& record, double max_deg, double max_m) {
  return record.rot_deg < max_deg && record.trans_m < max_m;
}

EvalRecord make_eval_record(const ObjectModel& model, const Pose& pred, const Pose& gt,
                            const std::string& scene_id) {
  EvalRecord r;
  r.scene_id = scene_id;
  r.object_id = model.id();
  r.add = add_metric(model, pred, gt);
  r.add_s = adds_metric(model, pred, gt);
  const PoseError e = pose_error(pred, gt);
  r.rot_deg = e.rot_deg;
  r.trans_m = e.trans_m;
  r.diameter = model.diameter();
  r.symmetric = model.symmetric();
  return r;
}

Summary evaluate_batch(const std::vector<EvalRecord>& records, double auc_max_threshold) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "no records to evaluate");
  std::map<std::string, std::vector<const EvalRecord*>> by_object;
  for (const EvalRecord& r : records) by_object[r.object_id].push_back(&r);

  Summary summary;
  summary.average.object_id = "avg";
  for (const auto& [id, group] : by_object) {
    SummaryRow row;
    row.object_id = id;
    row.count = group.size();
    std::vector<double> adds, mixed;
    std::size_t hits_01d = 0, hits_degcm = 0;
    for (const EvalRecord* r : group) {
      adds.push_back(r->add_s);
      mixed.push_back(add_or_adds(*r));
      hits_01d += add_01d(*r) ? 1 : 0;
      hits_degcm += deg_cm(*r) ? 1 : 0;
    }
    const double n = static_cast<double>(group.size());
    row.add_s_auc = add_auc(adds, auc_max_threshold);
    row.adds_auc_mixed = add_auc(mixed, auc_max_threshold);
    row.add01d_pct = 100.0 * static_cast<double>(hits_01d) / n;
    row.deg10cm10_pct = 100.0 * static_cast<double>(hits_degcm) / n;
    summary.objects.push_back(row);

    summary.average.count += row.count;
    summary.average.add_s_auc += row.add_s_auc;
    summary.average.adds_auc_mixed += row.adds_auc_mixed;
    summary.average.add01d_pct += row.add01d_pct;
    summary.average.deg10cm10_pct += row.deg10cm10_pct;
  }
  const double m = static_cast<double>(summary.objects.size());
  summary.average.add_s_auc /= m;
  summary.average.adds_auc_mixed /= m;
  summary.average.add01d_pct /= m;
  summary.average.deg10cm10_pct /= m;
  return summary;
}

std::string summary_csv(const Summary& summary) {
  std::string out = "object_id,add_s_auc,adds_auc_mixed,add01d_pct,deg10cm10_pct\n";
  auto line = [&](const SummaryRow& r) {
    out += r.object_id + "," + fmt(r.add_s_auc) + "," + fmt(r.adds_auc_mixed) + "," +
           fmt(r.add01d_pct) + "," + fmt(r.deg10cm10_pct) + "\n";
  };
  for (const SummaryRow& r : summary.objects) line(r);
  line(summary.average);
  return out;
}

std::string summary_table(const Summary& summary) {
  std::size_t width = 9;
  for (const SummaryRow& r : summary.objects) width = std::max(width, r.object_id.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("object", width) + "  n      ADD-S AUC  ADD(-S) AUC  ADD(-S) 0.1d  10deg/10cm\n";
  auto line = [&](const SummaryRow& r, const std::string& label) {
    out += pad(label, width) + "  " + pad(std::to_string(r.count), 5) + "  " +
           pad(fixed(100.0 * r.add_s_auc, 2), 9) + "  " + pad(fixed(100.0 * r.adds_auc_mixed, 2), 11) +
           "  " + pad(fixed(r.add01d_pct, 2), 12) + "  " + fixed(r.deg10cm10_pct, 2) + "\n";
  };
  for (const SummaryRow& r : summary.objects) line(r, r.object_id);
  line(summary.average, "Avg (" + std::to_string(summary.objects.size()) + ")");
  return out;
}

std::string summary_json(const Summary& summary) {
  auto row = [](const SummaryRow& r) {
    return nlohmann::json{{"object_id", r.object_id},     {"count", r.count},
                          {"add_s_auc", r.add_s_auc},     {"adds_auc_mixed", r.adds_auc_mixed},
                          {"add01d_pct", r.add01d_pct},   {"deg10cm10_pct", r.deg10cm10_pct}};
  };
  nlohmann::json j;
  j["objects"] = nlohmann::json::array();
  for (const SummaryRow& r : summary.objects) j["objects"].push_back(row(r));
  j["average"] = row(summary.average);
  return j.dump(2) + "\n";
}

}  // namespace anchorpose
