#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "leafpeel/cli_io.hpp"
#include "leafpeel/error.hpp"
#include "leafpeel/fixtures.hpp"
#include "leafpeel/forward_data.hpp"
#include "leafpeel/reconstruct.hpp"

namespace py = pybind11;
using namespace leafpeel;

namespace {

py::tuple edge_tuple(const MetricTree& t, const Edge& e) {
  return py::make_tuple(e.label, t.vertices()[e.from].label, t.vertices()[e.to].label, e.length);
}

}  // namespace

PYBIND11_MODULE(_leafpeel, m) {
  m.doc() = "Leaf peeling on metric trees";
  m.attr("__version__") = std::string(io::kVersion);

  static py::handle exc = py::exception<Error>(m, "LeafpeelError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(exc)(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("data_error") = is_data_error(e.code());
      PyErr_SetObject(exc.ptr(), inst.ptr());
    }
  });

  py::class_<MetricTree>(m, "Tree")
      .def_static("parse", [](const std::string& text) { return io::parse_tree(text); }, py::arg("text"))
      .def_static("read", &io::read_tree, py::arg("path"))
      .def("serialize", &io::serialize_tree)
      .def("write", [](const MetricTree& t, const std::filesystem::path& p) { io::write_tree(t, p); })
      .def_property_readonly("hash", &io::tree_hash)
      .def_property_readonly("root", [](const MetricTree& t) { return t.vertices()[t.root()].label; })
      .def("boundary_labels", &boundary_labels, py::arg("reduced") = true)
      .def_property_readonly("edges", [](const MetricTree& t) {
        py::list out;
        for (const auto& e : t.edges()) out.append(edge_tuple(t, e));
        return out;
      })
      .def("__repr__", [](const MetricTree& t) {
        return "<Tree " + std::to_string(t.edges().size()) + " edges, root " + t.vertices()[t.root()].label + ">";
      });

  auto fx = m.def_submodule("fixtures", "Reference trees");
  fx.def("three_star", [](double a, double b, double c) { return fixtures::three_star(a, b, c); }, py::arg("l1") = 1.0,
         py::arg("l2") = 2.0, py::arg("l3") = 3.0);
  fx.def("two_level", &fixtures::two_level, py::arg("with_potential") = true);
  fx.def("caterpillar", &fixtures::caterpillar);
  fx.def("broom", &fixtures::broom);

  py::class_<ResponseMatrix>(m, "Response")
      .def_readonly("labels", &ResponseMatrix::labels)
      .def_readonly("dt", &ResponseMatrix::dt)
      .def_readonly("dx", &ResponseMatrix::dx)
      .def_property_readonly("horizon", &ResponseMatrix::horizon)
      .def_property_readonly("size", &ResponseMatrix::size)
      .def("regular",
           [](const ResponseMatrix& R, std::size_t i, std::size_t j) {
             const auto& v = R.at(i, j).regular.values();
             return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
           })
      .def("train",
           [](const ResponseMatrix& R, std::size_t i, std::size_t j) {
             py::list out;
             for (const auto& a : R.at(i, j).train.atoms()) out.append(py::make_tuple(a.time, a.coeff, a.order));
             return out;
           })
      .def("write",
           [](const ResponseMatrix& R, const std::filesystem::path& dir, const std::string& tree_hash) {
             io::write_response(R, {tree_hash, "python", {}}, dir);
           },
           py::arg("dir"), py::arg("tree_hash") = "")
      .def_static("read", [](const std::filesystem::path& dir) { return io::read_response(dir); });

  m.def("response_matrix",
        [](const MetricTree& t, double T, double dx, bool reduced) {
          py::gil_scoped_release release;
          return response_matrix(t, T, dx, {{}, reduced});
        },
        py::arg("tree"), py::arg("T"), py::arg("dx"), py::arg("reduced") = true);

  m.def("tw_matrix", [](const MetricTree& t, cplx lambda, bool reduced) { return tw_matrix(t, lambda, reduced); },
        py::arg("tree"), py::arg("lam"), py::arg("reduced") = true);

  m.def("reconstruct",
        [](const ResponseMatrix& R, const std::string& root) {
          RecoveredTree rt;
          {
            py::gil_scoped_release release;
            rt = reconstruct_tree(R, root);
          }
          py::list edges;
          for (const auto& e : rt.edges) {
            py::dict d;
            d["from"] = e.from;
            d["to"] = e.to;
            d["length"] = e.length;
            d["stage"] = e.stage;
            d["length_residual"] = e.length_residual;
            d["potential_residual"] = e.potential_residual;
            edges.append(d);
          }
          py::dict out;
          out["tree"] = rt.tree;
          out["stages"] = rt.stages;
          out["edges"] = edges;
          return out;
        },
        py::arg("response"), py::arg("root") = "root");

  m.def("verify",
        [](const ResponseMatrix& a, const ResponseMatrix& b, double eps_time, double eps_coeff, double l2_rel) {
          const auto rep = io::verify(a, b, {eps_time, eps_coeff, l2_rel});
          return py::make_tuple(rep.pass, rep.text());
        },
        py::arg("a"), py::arg("b"), py::arg("eps_time") = 1e-9, py::arg("eps_coeff") = 1e-8, py::arg("l2_rel") = 0.02);
}
