#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "vascuscan/aggregate.hpp"
#include "vascuscan/checkpoint.hpp"
#include "vascuscan/detect.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/mesh.hpp"
#include "vascuscan/parcel.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/ply.hpp"
#include "vascuscan/pointnet.hpp"
#include "vascuscan/train.hpp"
#include "vascuscan/volume.hpp"

namespace py = pybind11;
using namespace vascuscan;

namespace {

using Array3 = std::array<double, 3>;
template <class T>
using Arr = py::array_t<T, py::array::c_style | py::array::forcecast>;

Arr<double> vertices_array(const TriangleMesh& m) {
  Arr<double> a({m.vertices.size(), std::size_t{3}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    r(i, 0) = m.vertices[i].x;
    r(i, 1) = m.vertices[i].y;
    r(i, 2) = m.vertices[i].z;
  }
  return a;
}

Arr<std::uint32_t> faces_array(const TriangleMesh& m) {
  Arr<std::uint32_t> a({m.faces.size(), std::size_t{3}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.faces.size(); ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = m.faces[i][k];
  return a;
}

template <class T>
Arr<T> vector_array(const std::vector<T>& v) {
  Arr<T> a(v.size());
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

template <class T>
std::vector<T> array_vector(const Arr<T>& a) {
  return std::vector<T>(a.data(), a.data() + a.size());
}

void check_columns(const py::buffer_info& b, const char* what) {
  if (b.ndim != 2 || b.shape[1] != 3) throw ValidationError("shape", std::string(what) + " must be N x 3");
}

TriangleMesh make_mesh(const Arr<double>& vertices, const Arr<std::int64_t>& faces) {
  check_columns(vertices.request(), "vertices");
  check_columns(faces.request(), "faces");
  TriangleMesh m;
  auto v = vertices.unchecked<2>();
  for (py::ssize_t i = 0; i < v.shape(0); ++i) m.vertices.push_back({v(i, 0), v(i, 1), v(i, 2)});
  auto f = faces.unchecked<2>();
  for (py::ssize_t i = 0; i < f.shape(0); ++i) {
    Face face;
    for (int k = 0; k < 3; ++k) {
      if (f(i, k) < 0) throw ValidationError("face_index", "negative face index");
      face[k] = static_cast<std::uint32_t>(f(i, k));
    }
    m.faces.push_back(face);
  }
  m.validate();
  return m;
}

// (z, y, x) array to a volume with x fastest.
ScalarVolume to_volume(const Arr<float>& data, Array3 spacing, Array3 origin) {
  const auto b = data.request();
  if (b.ndim != 3) throw ValidationError("shape", "volume must be a 3-d array indexed (z, y, x)");
  ScalarVolume v({static_cast<int>(b.shape[2]), static_cast<int>(b.shape[1]),
                  static_cast<int>(b.shape[0])},
                 spacing, origin);
  std::copy(data.data(), data.data() + data.size(), v.data.begin());
  v.validate();
  return v;
}

Arr<float> from_volume(const ScalarVolume& v) {
  Arr<float> a({static_cast<std::size_t>(v.dims[2]), static_cast<std::size_t>(v.dims[1]),
                static_cast<std::size_t>(v.dims[0])});
  std::copy(v.data.begin(), v.data.end(), a.mutable_data());
  return a;
}

std::vector<Blob> to_blobs(const std::vector<std::pair<Array3, double>>& blobs) {
  std::vector<Blob> out;
  for (const auto& [c, r] : blobs) out.push_back(Blob{{c[0], c[1], c[2]}, r, 0.0});
  return out;
}

Heatmap to_heatmap(const TriangleMesh& m, const Arr<double>& heat) {
  if (static_cast<std::size_t>(heat.size()) != m.vertices.size())
    throw ValidationError("heat_length", "heat needs one value per vertex");
  Heatmap h;
  h.heat = array_vector(heat);
  h.count.assign(h.heat.size(), 1);
  return h;
}

py::dict curve_dict(const FrocCurve& c) {
  py::list points;
  for (const auto& p : c.points) {
    py::dict d;
    d["threshold"] = p.threshold;
    d["tp"] = p.tp;
    d["fp"] = p.fp;
    d["fn"] = p.fn;
    d["sensitivity"] = p.sensitivity;
    d["fp_per_image"] = p.fp_per_image;
    points.append(d);
  }
  py::dict out;
  out["points"] = points;
  out["auc"] = c.auc;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of vascuscan";

  static py::exception<Error> error(m, "VascuscanError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (e.code() + ": " + e.what()).c_str());
    }
  });

  py::class_<TriangleMesh>(m, "Mesh")
      .def(py::init(&make_mesh), py::arg("vertices"), py::arg("faces"))
      .def_property_readonly("vertices", &vertices_array)
      .def_property_readonly("faces", &faces_array)
      .def_property(
          "labels",
          [](const TriangleMesh& t) -> std::optional<Arr<std::uint8_t>> {
            if (!t.labels) return std::nullopt;
            return vector_array(*t.labels);
          },
          [](TriangleMesh& t, std::optional<Arr<std::uint8_t>> a) {
            if (a) t.labels = array_vector(*a);
            else t.labels.reset();
            t.validate();
          })
      .def_property(
          "heat",
          [](const TriangleMesh& t) -> std::optional<Arr<double>> {
            if (!t.heat) return std::nullopt;
            return vector_array(*t.heat);
          },
          [](TriangleMesh& t, std::optional<Arr<double>> a) {
            if (a) t.heat = array_vector(*a);
            else t.heat.reset();
            t.validate();
          })
      .def_property_readonly("euler_characteristic", &euler_characteristic)
      .def_property_readonly("area", &surface_area)
      .def("__len__", &TriangleMesh::vertex_count);

  m.def("load_ply", [](const std::string& p) { return load_ply(p); }, py::arg("path"));
  m.def("save_ply", [](const TriangleMesh& t, const std::string& p) { save_ply(t, p); },
        py::arg("mesh"), py::arg("path"));

  m.def(
      "extract_mesh",
      [](const Arr<float>& volume, Array3 spacing, Array3 origin, double iso, bool smooth) {
        TriangleMesh t = marching_cubes(to_volume(volume, spacing, origin), iso);
        return smooth ? smooth_non_shrinking(std::move(t)) : t;
      },
      py::arg("volume"), py::arg("spacing") = Array3{1, 1, 1}, py::arg("origin") = Array3{0, 0, 0},
      py::arg("iso") = 0.5, py::arg("smooth") = true,
      "Isosurface of a (z, y, x) volume, optionally with non-shrinking smoothing.");

  m.def(
      "make_ball",
      [](std::array<int, 3> dims, Array3 center, double radius, double sigma) {
        return from_volume(make_ball_volume(dims, {center[0], center[1], center[2]}, radius, sigma));
      },
      py::arg("dims"), py::arg("center"), py::arg("radius"), py::arg("sigma") = 0.0,
      "Solid ball volume; dims and center are (x, y, z) in voxels.");

  m.def(
      "phantom",
      [](const std::string& family, std::uint64_t seed, std::optional<int> blobs) {
        PhantomSpec spec = PhantomSpec::for_family(parse_family(family), seed);
        if (blobs) spec.blob_count = *blobs;
        const Phantom p = generate_phantom(spec);
        py::list blob_list;
        for (const Blob& b : p.blobs)
          blob_list.append(py::make_tuple(py::make_tuple(b.center.x, b.center.y, b.center.z), b.radius));
        py::dict out;
        out["volume"] = from_volume(p.volume);
        out["spacing"] = p.volume.spacing;
        out["blobs"] = blob_list;
        out["mesh"] = label_mesh(smooth_non_shrinking(marching_cubes(p.volume, 0.5)), p.blobs,
                                 spec.label_margin);
        return out;
      },
      py::arg("family") = "A", py::arg("seed") = 0, py::arg("blobs") = py::none(),
      "Synthetic vessel tree: volume, blob list (centre mm, radius mm) and labelled mesh.");

  m.def(
      "label_mesh",
      [](const TriangleMesh& t, const std::vector<std::pair<Array3, double>>& blobs, double margin) {
        return label_mesh(t, to_blobs(blobs), margin);
      },
      py::arg("mesh"), py::arg("blobs"), py::arg("margin") = 0.0);

  m.def(
      "geodesic_knn",
      [](const TriangleMesh& t, std::uint32_t seed, std::size_t k) {
        const auto nn = geodesic_knn(build_adjacency(t), seed, k);
        Arr<std::uint32_t> ids(nn.size());
        Arr<double> dist(nn.size());
        for (std::size_t i = 0; i < nn.size(); ++i) {
          ids.mutable_data()[i] = nn[i].vertex;
          dist.mutable_data()[i] = nn[i].distance;
        }
        return py::make_tuple(ids, dist);
      },
      py::arg("mesh"), py::arg("seed"), py::arg("k"));

  m.def(
      "plan_inference",
      [](const TriangleMesh& t, std::uint64_t seed, std::size_t n) {
        const ParcelPlan plan = plan_inference(t, build_adjacency(t), seed, n);
        py::list clouds;
        for (const auto& c : plan.clouds) clouds.append(vector_array(c.vertex_ids));
        py::dict out;
        out["clouds"] = clouds;
        out["coverage"] = vector_array(plan.coverage);
        return out;
      },
      py::arg("mesh"), py::arg("seed") = 0, py::arg("cloud_size") = 3000);

  py::class_<ModelParams>(m, "Model")
      .def_static(
          "init",
          [](const std::string& widths, std::uint64_t seed) {
            if (widths != "miniature" && widths != "default")
              throw ValidationError("invalid_flag", "widths must be miniature or default");
            return init_params(widths == "miniature" ? ModelConfig::miniature() : ModelConfig{}, seed);
          },
          py::arg("widths") = "miniature", py::arg("seed") = 0)
      .def("save", [](const ModelParams& p, const std::string& base) { save_checkpoint(p, base); })
      .def_property_readonly("parameter_count", [](const ModelParams& p) {
        std::size_t n = 0;
        for (const auto& e : p.entries()) n += e.value.size();
        return n;
      });

  m.def("load_checkpoint", [](const std::string& p) { return load_checkpoint(p); }, py::arg("path"));

  m.def(
      "predict",
      [](const TriangleMesh& t, const ModelParams& params, std::uint64_t seed, std::size_t n,
         std::size_t jobs) {
        const ParcelPlan plan = plan_inference(t, build_adjacency(t), seed, n);
        Heatmap h;
        {
          py::gil_scoped_release release;
          h = predict_heatmap(t, params, plan, jobs);
        }
        return py::make_tuple(vector_array(h.heat), vector_array(h.count));
      },
      py::arg("mesh"), py::arg("model"), py::arg("seed") = 0, py::arg("cloud_size") = 3000,
      py::arg("jobs") = 1, "Per-vertex heat and coverage counts.");

  m.def(
      "detect",
      [](const TriangleMesh& t, const Arr<double>& heat, double threshold) {
        py::list out;
        for (const auto& d : binarize_and_label(t, to_heatmap(t, heat), threshold))
          out.append(py::make_tuple(vector_array(d.region), d.score));
        return out;
      },
      py::arg("mesh"), py::arg("heat"), py::arg("threshold") = 0.5,
      "Detections as (vertex ids, score) pairs.");

  m.def("default_thresholds", &default_thresholds);

  m.def(
      "froc",
      [](const std::vector<TriangleMesh>& meshes, const std::vector<Arr<double>>& heats,
         std::optional<std::vector<double>> thresholds) {
        if (meshes.size() != heats.size())
          throw ValidationError("count_mismatch", "one heat array per mesh");
        std::vector<Heatmap> hs;
        for (std::size_t i = 0; i < meshes.size(); ++i) hs.push_back(to_heatmap(meshes[i], heats[i]));
        std::vector<EvalCase> cases;
        for (std::size_t i = 0; i < meshes.size(); ++i) cases.push_back({&meshes[i], &hs[i]});
        return curve_dict(froc(cases, thresholds ? *thresholds : default_thresholds()));
      },
      py::arg("meshes"), py::arg("heats"), py::arg("thresholds") = py::none());

  m.def(
      "effective_lr",
      [](std::size_t epoch, double lr, double decay_rate, std::size_t decay_step) {
        TrainConfig c;
        c.lr = lr;
        c.decay_rate = decay_rate;
        c.decay_step = decay_step;
        return effective_lr(epoch, c);
      },
      py::arg("epoch"), py::arg("lr") = 0.001, py::arg("decay_rate") = 0.5,
      py::arg("decay_step") = 20);
}
