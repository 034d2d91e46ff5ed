#pragma once

#include <string>
#include <vector>

#include "anchorpose/geom.hpp"
#include "anchorpose/mesh.hpp"

namespace anchorpose {

inline constexpr double kAucMaxThreshold = 0.10;

struct EvalRecord {
  std::string scene_id;
  std::string object_id;
  double add = 0.0;
  double add_s = 0.0;
  double rot_deg = 0.0;
  double trans_m = 0.0;
  double diameter = 0.0;
  bool symmetric = false;
};

// Mean distance between corresponding model points under the two poses.
double add_metric(const std::vector<Vec3>& points, const Pose& pred, const Pose& gt);
double add_metric(const ObjectModel& model, const Pose& pred, const Pose& gt);

enum class NearestSearch { kAuto, kExact, kTree };

// Mean over points x1 under `pred` of the distance to the closest point x2
// under `gt`. kTree indexes the gt-posed cloud in a k-d tree and returns
// exactly what the kExact full scan returns; kAuto picks it above 256 points.
double adds_metric(const std::vector<Vec3>& points, const Pose& pred, const Pose& gt,
                   NearestSearch search = NearestSearch::kAuto);
double adds_metric(const ObjectModel& model, const Pose& pred, const Pose& gt,
                   NearestSearch search = NearestSearch::kAuto);

// Area under accuracy(tau) for tau in (0, max_threshold], divided by
// max_threshold. Throws EmptyInput.
double add_auc(const std::vector<double>& distances, double max_threshold = kAucMaxThreshold);

// ADD-S for symmetric objects, ADD otherwise.
double add_or_adds(const EvalRecord& record);

// Strict comparisons: a value equal to the threshold fails.
bool add_01d(const EvalRecord& record);
bool deg_cm(const EvalRecord& record, double max_deg = 10.0, double max_m = 0.10);

EvalRecord make_eval_record(const ObjectModel& model, const Pose& pred, const Pose& gt,
                            const std::string& scene_id = "");

struct SummaryRow {
  std::string object_id;
  std::size_t count = 0;
  double add_s_auc = 0.0;       // AUC of ADD-S, fraction
  double adds_auc_mixed = 0.0;  // AUC of ADD(-S), fraction
  double add01d_pct = 0.0;
  double deg10cm10_pct = 0.0;
};

struct Summary {
  std::vector<SummaryRow> objects;  // sorted by object id
  SummaryRow average;               // unweighted mean over objects, id "avg"
};

Summary evaluate_batch(const std::vector<EvalRecord>& records,
                       double auc_max_threshold = kAucMaxThreshold);

// Columns: object_id, add_s_auc, adds_auc_mixed, add01d_pct, deg10cm10_pct.
std::string summary_csv(const Summary& summary);
std::string summary_table(const Summary& summary);
std::string summary_json(const Summary& summary);

}  // namespace anchorpose
