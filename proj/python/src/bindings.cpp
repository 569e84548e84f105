// Python bindings for the core operations. Arrays cross the boundary as
// numpy: images are (H, W, C) uint8, embeddings (N, D) float32.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bevcv/complexity.hpp"
#include "bevcv/config.hpp"
#include "bevcv/error.hpp"
#include "bevcv/eval.hpp"
#include "bevcv/formats.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/index.hpp"
#include "bevcv/loss.hpp"
#include "bevcv/model.hpp"
#include "bevcv/version.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace bevcv;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageRaster to_raster(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw InvalidArgument("image must be (H, W) or (H, W, C)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return ImageRaster(w, h, c, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_raster(const ImageRaster& img) {
  U8Array out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

EmbeddingSet to_set(const std::vector<std::uint64_t>& ids, const F32Array& v) {
  if (v.ndim() != 2) throw InvalidArgument("embeddings must be a 2-D array");
  if (static_cast<std::size_t>(v.shape(0)) != ids.size()) {
    throw DimensionMismatch("one id per embedding row required");
  }
  EmbeddingSet s;
  s.dim = static_cast<std::size_t>(v.shape(1));
  s.ids = ids;
  s.values.assign(v.data(), v.data() + v.size());
  return s;
}

F32Array set_values(const EmbeddingSet& s) {
  F32Array out({s.size(), s.dim});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

std::span<const float> as_query(const F32Array& q) {
  if (q.ndim() != 1) throw InvalidArgument("query must be a 1-D array");
  return {q.data(), static_cast<std::size_t>(q.size())};
}

py::list neighbors(const RetrievalResult& r) {
  py::list out;
  for (const auto& n : r) out.append(py::make_tuple(n.id, n.similarity));
  return out;
}

Eigen::MatrixXd to_matrix(const F64Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  Eigen::MatrixXd m(a.shape(0), a.shape(1));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = a.at(i, j);
  return m;
}

F64Array from_matrix(const Eigen::MatrixXd& m) {
  F64Array out({m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.mutable_at(i, j) = m(i, j);
  return out;
}

py::dict report_dict(const RecallReport& r) {
  py::dict d;
  d["queries"] = r.queries;
  d["index_size"] = r.index_size;
  d["top1pct_k"] = r.top_percent_k;
  d["r1"] = r.r1;
  d["r5"] = r.r5;
  d["r10"] = r.r10;
  d["r1pct"] = r.r1pct;
  return d;
}

RunConfig config_from(const std::optional<std::string>& json) {
  return json ? parse_config(*json) : default_config();
}

}  // namespace

PYBIND11_MODULE(_bevcv, m) {
  m.doc() = "BEV-CV cross-view geo-localisation core";
  m.attr("__version__") = kVersion;

  // File-level failures surface as OSError, everything else as ValueError.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.family() == ErrorFamily::kIo) {
        py::set_error(PyExc_OSError, e.what());
      } else {
        py::set_error(PyExc_ValueError, e.what());
      }
    }
  });

  // imaging
  m.def("load_image", [](const std::string& path) { return from_raster(load_image(path)); },
        py::arg("path"), "Decode a PNG or PPM file to (H, W, C) uint8.");
  m.def("fov_crop",
        [](const U8Array& pano, double fov_deg, double yaw_deg) {
          return from_raster(fov_crop(to_raster(pano), {fov_deg, yaw_deg}));
        },
        py::arg("panorama"), py::arg("fov_deg"), py::arg("yaw_deg"),
        "Limited-FOV crop of a 360-degree panorama centred at yaw.");
  m.def("crop_width", &crop_width, py::arg("pano_width"), py::arg("fov_deg"));
  m.def("resize_bilinear",
        [](const U8Array& img, int w, int h) {
          return from_raster(resize_bilinear(to_raster(img), w, h));
        },
        py::arg("image"), py::arg("width"), py::arg("height"));

  // retrieval
  py::class_<EmbeddingIndex>(m, "EmbeddingIndex")
      .def(py::init([](const std::vector<std::uint64_t>& ids, const F32Array& v,
                       std::size_t leaf_size, bool normalize) {
             IndexOptions o;
             o.leaf_size = leaf_size;
             o.normalize = normalize;
             return EmbeddingIndex::build(to_set(ids, v), o);
           }),
           py::arg("ids"), py::arg("vectors"), py::arg("leaf_size") = 16,
           py::arg("normalize") = false)
      .def("query",
           [](const EmbeddingIndex& idx, const F32Array& q, std::size_t k) {
             return neighbors(idx.query(as_query(q), k));
           },
           py::arg("query"), py::arg("k"),
           "Top-k (id, similarity) pairs, best first, ties by ascending id.")
      .def_property_readonly("size", &EmbeddingIndex::size)
      .def_property_readonly("dim", &EmbeddingIndex::dim)
      .def("__len__", &EmbeddingIndex::size);
  m.def("brute_force_topk",
        [](const std::vector<std::uint64_t>& ids, const F32Array& v, const F32Array& q,
           std::size_t k) { return neighbors(brute_force_topk(to_set(ids, v), as_query(q), k)); },
        py::arg("ids"), py::arg("vectors"), py::arg("query"), py::arg("k"));

  // losses
  m.def("ntxent_loss",
        [](const F64Array& pov, const F64Array& aer, double temperature,
           const std::string& variant, bool symmetric) {
          LossConfig c;
          c.temperature = temperature;
          c.symmetric = symmetric;
          if (variant == "negatives_only") {
            c.variant = NtXentVariant::kNegativesOnly;
          } else if (variant == "standard") {
            c.variant = NtXentVariant::kStandard;
          } else {
            throw InvalidArgument("variant must be 'negatives_only' or 'standard'");
          }
          const PairLoss r = ntxent_loss(to_matrix(pov), to_matrix(aer), c);
          return py::make_tuple(r.loss, from_matrix(r.grad_pov), from_matrix(r.grad_aer));
        },
        py::arg("pov"), py::arg("aerial"), py::arg("temperature") = 0.1,
        py::arg("variant") = "negatives_only", py::arg("symmetric") = false,
        "Returns (loss, grad_pov, grad_aerial).");
  m.def("triplet_loss",
        [](const F64Array& pov, const F64Array& aer, double margin) {
          const PairLoss r = batch_triplet_loss(to_matrix(pov), to_matrix(aer), margin);
          return py::make_tuple(r.loss, from_matrix(r.grad_pov), from_matrix(r.grad_aer));
        },
        py::arg("pov"), py::arg("aerial"), py::arg("margin") = 0.3);

  // evaluation
  m.def("recall_at_k",
        [](const std::vector<std::vector<std::uint64_t>>& ranked,
           const std::vector<std::uint64_t>& truth, std::size_t k) {
          std::vector<RetrievalResult> rs;
          for (const auto& ids : ranked) {
            RetrievalResult r;
            for (auto id : ids) r.push_back({id, 0.0});
            rs.push_back(std::move(r));
          }
          return recall_at_k(rs, truth, k);
        },
        py::arg("ranked_ids"), py::arg("truth"), py::arg("k"));
  m.def("top_percent_k", &top_percent_k, py::arg("n"), py::arg("pct") = 1.0);
  m.def("evaluate",
        [](const EmbeddingIndex& idx, const std::vector<std::uint64_t>& qids,
           const F32Array& q, std::optional<std::vector<std::uint64_t>> truth, int jobs) {
          const EmbeddingSet qs = to_set(qids, q);
          return report_dict(evaluate_retrieval(idx, qs, truth ? *truth : qids, jobs));
        },
        py::arg("index"), py::arg("query_ids"), py::arg("queries"), py::arg("truth") = py::none(),
        py::arg("jobs") = 1);

  // complexity
  m.def("complexity_report",
        [](std::int64_t ref_dim, std::optional<std::string> config_json) {
          const RunConfig c = config_from(config_json);
          const auto r =
              complexity_report(describe_model_graph(c.net, c.grid, c.intrinsics), ref_dim);
          py::dict d;
          d["params"] = r.params;
          d["macs"] = r.macs;
          d["flops"] = r.flops;
          d["bias_adds"] = r.bias_adds;
          d["embedding_dim"] = r.embedding_dim;
          d["reference_dim"] = r.reference_dim;
          d["memory_reduction_pct"] = r.memory_reduction_pct;
          d["query_cost_reduction_pct"] = r.query_cost_reduction_pct;
          return d;
        },
        py::arg("reference_dim") = 768, py::arg("config_json") = py::none());

  // formats
  m.def("write_embeddings",
        [](const std::string& path, const std::vector<std::uint64_t>& ids, const F32Array& v) {
          write_embeddings(path, to_set(ids, v));
        },
        py::arg("path"), py::arg("ids"), py::arg("vectors"));
  m.def("read_embeddings",
        [](const std::string& path) {
          const EmbeddingSet s = read_embeddings(path);
          return py::make_tuple(s.ids, set_values(s));
        },
        py::arg("path"), "Returns (ids, (N, D) float32 array).");
  m.def("read_weights",
        [](const std::string& path) {
          const LayerWeights w = read_weights(path);
          py::dict d;
          for (const auto& e : w.entries()) {
            const std::vector<py::ssize_t> shape(e.tensor.dims().begin(),
                                                 e.tensor.dims().end());
            F32Array a{py::array::ShapeContainer(shape)};
            std::copy(e.tensor.values().begin(), e.tensor.values().end(), a.mutable_data());
            d[py::str(e.name)] = a;
          }
          return d;
        },
        py::arg("path"), "Returns {name: float32 array} in file order.");
  m.def("write_weights",
        [](const std::string& path, const py::dict& tensors) {
          std::vector<NamedTensor> ts;
          for (const auto& [k, v] : tensors) {
            const auto a = py::cast<F32Array>(v);
            Dims dims(a.shape(), a.shape() + a.ndim());
            ts.push_back({py::cast<std::string>(k),
                          Tensor(dims, std::vector<float>(a.data(), a.data() + a.size()))});
          }
          write_weights(path, ts);
        },
        py::arg("path"), py::arg("tensors"));

  // configuration and model
  m.def("default_config_json", [] { return config_to_json(default_config()); });
  m.def("init_weights",
        [](const std::string& path, std::uint64_t seed, std::optional<std::string> config_json) {
          write_weights(path, init_model_weights(config_from(config_json).model_spec(), seed));
        },
        py::arg("path"), py::arg("seed"), py::arg("config_json") = py::none());

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init([](const std::string& weights_path, std::optional<std::string> config_json) {
             return Pipeline(config_from(config_json).model_spec(), read_weights(weights_path));
           }),
           py::arg("weights_path"), py::arg("config_json") = py::none())
      .def("embed_pov",
           [](const Pipeline& p, const U8Array& pano, double fov_deg, double yaw_deg) {
             const auto e = p.embed_pov(to_raster(pano), {fov_deg, yaw_deg});
             return F32Array(e.values.size(), e.values.data());
           },
           py::arg("panorama"), py::arg("fov_deg"), py::arg("yaw_deg"))
      .def("embed_aerial",
           [](const Pipeline& p, const U8Array& img) {
             const auto e = p.embed_aerial(to_raster(img));
             return F32Array(e.values.size(), e.values.data());
           },
           py::arg("aerial"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = cli::run(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a bevcv command line; returns (exit_code, stdout, stderr).");
}
