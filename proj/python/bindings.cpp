// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "reloop/error.hpp"
#include "reloop/loop.hpp"

namespace py = pybind11;
using namespace reloop;

namespace {

LossConfig loss_config(const std::string& kind, double alpha) {
  LossConfig cfg{parse_loss_kind(kind), alpha};
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["n"] = m.n;
  d["n_pos"] = m.n_pos;
  d["n_neg"] = m.n_neg;
  d["auc"] = m.auc;
  d["logloss"] = m.logloss;
  return d;
}

}  // namespace

PYBIND11_MODULE(_reloop, m) {
  m.doc() = "ReLoop CTR training core";

  static py::exception<Error> error(m, "ReLoopError");
  static py::exception<UsageError> usage_error(m, "UsageError", error.ptr());
  static py::exception<DataError> data_error(m, "DataError", error.ptr());
  static py::exception<CheckpointError> checkpoint_error(m, "CheckpointError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      py::set_error(usage_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const CheckpointError& e) {
      py::set_error(checkpoint_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("ce_loss", [](int y, double y_hat) { return ce_loss(y, y_hat); }, py::arg("y"), py::arg("y_hat"));
  m.def("sc_loss", &sc_loss, py::arg("y"), py::arg("y_hat"), py::arg("y_last"));
  m.def("kd_loss", [](double y_last, double y_hat) { return kd_loss(y_last, y_hat); }, py::arg("y_last"),
        py::arg("y_hat"));
  m.def(
      "combined_loss",
      [](const std::string& kind, double alpha, int y, double y_hat, std::optional<double> y_last) {
        return combined_loss(loss_config(kind, alpha), y, y_hat, y_last);
      },
      py::arg("kind"), py::arg("alpha"), py::arg("y"), py::arg("y_hat"), py::arg("y_last") = py::none());
  m.def(
      "loss_grad_z",
      [](const std::string& kind, double alpha, int y, double y_hat, std::optional<double> y_last) {
        return loss_grad_z(loss_config(kind, alpha), y, y_hat, y_last);
      },
      py::arg("kind"), py::arg("alpha"), py::arg("y"), py::arg("y_hat"), py::arg("y_last") = py::none());
  m.def(
      "loss_curves",
      [](int y, double y_last, std::size_t n) {
        std::vector<std::tuple<double, double, double, double>> rows;
        for (const auto& p : emit_loss_curves(y, y_last, n)) rows.emplace_back(p.y_hat, p.l_ce, p.l_kd, p.l_sc);
        return rows;
      },
      "Rows of (y_hat, l_ce, l_kd, l_sc)", py::arg("y"), py::arg("y_last"), py::arg("grid") = 99);

  m.def("auc", [](const std::vector<int>& y, const std::vector<double>& s) { return auc(y, s); }, py::arg("labels"),
        py::arg("scores"));
  m.def("logloss", [](const std::vector<int>& y, const std::vector<double>& s) { return logloss(y, s); },
        py::arg("labels"), py::arg("scores"));
  m.def(
      "evaluate", [](const std::vector<int>& y, const std::vector<double>& s) { return metrics_dict(evaluate(y, s)); },
      py::arg("labels"), py::arg("scores"));

  m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); }, py::arg("data"));
  m.def(
      "hash_feature",
      [](const std::string& field, std::uint32_t buckets, const std::string& token) {
        const FeatureSchema schema({{field, FieldKind::kCategorical, buckets}});
        return hash_feature(schema, 0, token);
      },
      "Index of `token` within a single field of `buckets` buckets", py::arg("field"), py::arg("buckets"),
      py::arg("token"));
  m.def(
      "transform_numerical", [](std::optional<double> v) { return transform_numerical(v).bucket; },
      py::arg("value"));

  m.def(
      "generate_synthetic",
      [](std::uint32_t n_fields, std::uint32_t buckets, std::uint32_t latent_dim, std::uint64_t n_rows,
         std::uint64_t seed, std::uint32_t n_windows, double drift) {
        SyntheticSpec spec{n_fields, buckets, latent_dim, n_rows, seed, n_windows, drift};
        py::list windows;
        for (const auto& t : generate_synthetic(spec)) {
          py::dict w;
          std::vector<int> labels;
          std::vector<std::vector<std::string>> cells;
          for (const auto& r : t.rows) {
            labels.push_back(r.label);
            std::vector<std::string> row;
            for (const auto& c : r.cells) row.push_back(c.value_or(""));
            cells.push_back(std::move(row));
          }
          w["field_names"] = t.field_names;
          w["labels"] = labels;
          w["cells"] = cells;
          windows.append(w);
        }
        return windows;
      },
      py::arg("n_fields") = 8, py::arg("buckets") = 100, py::arg("latent_dim") = 4, py::arg("n_rows") = 10000,
      py::arg("seed") = 42, py::arg("n_windows") = 1, py::arg("drift") = 0.0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Run a reloop command; returns (exit_code, stdout, stderr)", py::arg("args"));
}
