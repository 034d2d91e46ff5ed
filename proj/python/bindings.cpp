#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anchorpose/codec.hpp"
#include "anchorpose/error.hpp"
#include "anchorpose/experiments.hpp"
#include "anchorpose/geom.hpp"
#include "anchorpose/metrics.hpp"
#include "anchorpose/solver.hpp"
#include "anchorpose/synth.hpp"

namespace py = pybind11;
using namespace anchorpose;

namespace {

using Rows3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Rows2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Vec3> to_points(const Rows3& m) {
  std::vector<Vec3> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Rows3 from_points(const std::vector<Vec3>& pts) {
  Rows3 m(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(i) = pts[i].transpose();
  return m;
}

std::vector<Vec2> to_pixels(const Rows2& m) {
  std::vector<Vec2> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

CorrSet make_corr(const Rows3& obj, const std::optional<Rows3>& cam, const std::optional<Rows2>& img,
                  const std::optional<std::vector<double>>& weights) {
  CorrSet c;
  c.obj_pts = to_points(obj);
  if (cam) c.cam_pts = to_points(*cam);
  if (img) c.img_pts = to_pixels(*img);
  c.weights = weights ? *weights : std::vector<double>(c.obj_pts.size(), 1.0);
  return c;
}

}  // namespace

PYBIND11_MODULE(_anchorpose, m) {
  m.doc() = "Anchor-based residual encoding and classical pose recovery.";

  static py::exception<Error> error(m, "AnchorposeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object code = py::str(error_code_name(e.code()));
      PyErr_SetObject(error.ptr(), py::make_tuple(code, py::str(e.what())).ptr());
    }
  });

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Mat3& r, const Vec3& t) { return Pose{r, t}; }), py::arg("rotation"),
           py::arg("translation"))
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation)
      .def("apply", &Pose::apply)
      .def("is_valid", &Pose::is_valid, py::arg("tol") = 1e-9)
      .def("__repr__", [](const Pose& p) {
        return "Pose(t=[" + std::to_string(p.translation.x()) + ", " +
               std::to_string(p.translation.y()) + ", " + std::to_string(p.translation.z()) + "])";
      });

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init([](double fx, double fy, double cx, double cy) { return Intrinsics{fx, fy, cx, cy}; }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"))
      .def_readwrite("fx", &Intrinsics::fx)
      .def_readwrite("fy", &Intrinsics::fy)
      .def_readwrite("cx", &Intrinsics::cx)
      .def_readwrite("cy", &Intrinsics::cy)
      .def("matrix", &Intrinsics::matrix);

  m.def("project", &project, py::arg("point"), py::arg("pose"), py::arg("k"));
  m.def("backproject", &backproject, py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("k"));
  m.def("pose_compose", &pose_compose);
  m.def("pose_inverse", &pose_inverse);
  m.def("rot6d_to_matrix", [](const Vec3& a1, const Vec3& a2) { return rot6d_to_matrix({a1, a2}); },
        py::arg("a1"), py::arg("a2"));
  m.def("matrix_to_rot6d", [](const Mat3& r) {
    const Rot6D s = matrix_to_rot6d(r);
    return py::make_tuple(s.a1, s.a2);
  });

  py::enum_<Shape>(m, "Shape")
      .value("cube", Shape::kCube)
      .value("cylinder", Shape::kCylinder)
      .value("icosphere", Shape::kIcosphere)
      .value("blob", Shape::kBlob);

  py::class_<ObjectModel>(m, "ObjectModel")
      .def(py::init([](const std::string& id, const Rows3& pts, bool symmetric) {
             return ObjectModel(id, to_points(pts), symmetric);
           }),
           py::arg("id"), py::arg("points"), py::arg("symmetric") = false)
      .def_property_readonly("id", &ObjectModel::id)
      .def_property_readonly("points", [](const ObjectModel& o) { return from_points(o.points()); })
      .def_property_readonly("symmetric", &ObjectModel::symmetric)
      .def_property_readonly("diameter", [](const ObjectModel& o) { return o.diameter(); })
      .def("__len__", &ObjectModel::size);

  m.def("make_model",
        [](const std::string& shape, std::size_t n, double scale, std::uint64_t seed) {
          return make_model(shape_from_name(shape), n, scale, seed);
        },
        py::arg("shape"), py::arg("n_points"), py::arg("scale") = 0.1, py::arg("seed") = 0);

  py::class_<AnchorSet>(m, "AnchorSet")
      .def_property_readonly("anchors", [](const AnchorSet& a) { return from_points(a.anchors); })
      .def_readonly("covering_radius", &AnchorSet::covering_radius)
      .def_readonly("object_id", &AnchorSet::object_id)
      .def("__len__", &AnchorSet::size);

  m.def("build_anchor_set", &build_anchor_set, py::arg("model"), py::arg("k") = kDefaultAnchorCount);
  m.def("encode",
        [](const Vec3& p, const AnchorSet& a) {
          const ResidualCode c = encode(p, a);
          return py::make_tuple(c.anchor_index, c.residual);
        },
        py::arg("point"), py::arg("anchors"));
  m.def("decode",
        [](std::size_t index, const Vec3& residual, const AnchorSet& a) {
          return decode({index, residual}, a);
        },
        py::arg("anchor_index"), py::arg("residual"), py::arg("anchors"));

  py::class_<SolveReport>(m, "SolveReport")
      .def_readonly("pose", &SolveReport::pose)
      .def_readonly("inlier_count", &SolveReport::inlier_count)
      .def_readonly("rmse", &SolveReport::rmse)
      .def_readonly("iterations", &SolveReport::iterations)
      .def_readonly("converged", &SolveReport::converged)
      .def_readonly("objective_trace", &SolveReport::objective_trace)
      .def_property_readonly("mode", [](const SolveReport& r) { return mode_name(r.mode); });

  m.def("solve_3d3d",
        [](const Rows3& obj, const Rows3& cam, const std::optional<std::vector<double>>& w) {
          return solve_3d3d(make_corr(obj, cam, std::nullopt, w));
        },
        py::arg("obj_pts"), py::arg("cam_pts"), py::arg("weights") = py::none());
  m.def("solve_2d3d",
        [](const Rows3& obj, const Rows2& img, const Intrinsics& k, const std::optional<Pose>& init,
           const std::optional<std::vector<double>>& w) {
          return solve_2d3d(make_corr(obj, std::nullopt, img, w), k, init);
        },
        py::arg("obj_pts"), py::arg("img_pts"), py::arg("k"), py::arg("init") = py::none(),
        py::arg("weights") = py::none());
  m.def("solve_fused",
        [](const Rows3& obj, const Rows3& cam, const Rows2& img, const Intrinsics& k,
           const std::optional<std::vector<double>>& w) {
          return solve_fused(make_corr(obj, cam, img, w), k);
        },
        py::arg("obj_pts"), py::arg("cam_pts"), py::arg("img_pts"), py::arg("k"),
        py::arg("weights") = py::none());
  m.def("ransac_3d3d",
        [](const Rows3& obj, const Rows3& cam, double tol, int iters, std::uint64_t seed) {
          return ransac(make_corr(obj, cam, std::nullopt, std::nullopt), SolveMode::k3d3d,
                        {tol, iters, seed});
        },
        py::arg("obj_pts"), py::arg("cam_pts"), py::arg("inlier_tol") = 0.005,
        py::arg("max_iters") = 256, py::arg("seed") = 0);
  m.def("pose_error",
        [](const Pose& pred, const Pose& gt) {
          const PoseError e = pose_error(pred, gt);
          return py::make_tuple(e.rot_deg, e.trans_m);
        },
        py::arg("pred"), py::arg("gt"));

  m.def("add_metric", py::overload_cast<const ObjectModel&, const Pose&, const Pose&>(&add_metric),
        py::arg("model"), py::arg("pred"), py::arg("gt"));
  m.def("adds_metric",
        [](const ObjectModel& o, const Pose& pred, const Pose& gt) { return adds_metric(o, pred, gt); },
        py::arg("model"), py::arg("pred"), py::arg("gt"));
  m.def("add_auc", &add_auc, py::arg("distances"), py::arg("max_threshold") = kAucMaxThreshold);

  m.def("sample_rotation", [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_rotation(rng);
  });
}
