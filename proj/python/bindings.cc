// Copyright 2026 The embinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "embinv/beam_decoder.h"
#include "embinv/embedding_table.h"
#include "embinv/error.h"
#include "embinv/external_prior.h"
#include "embinv/harness.h"
#include "embinv/metrics.h"
#include "embinv/noise.h"
#include "embinv/prior.h"
#include "embinv/surrogate.h"

namespace py = pybind11;

namespace embinv {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix ToMatrix(const FloatArray& a) {
  if (a.ndim() != 2) throw InvalidArgumentError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<float>(a.data(), a.data() + rows * cols));
}

FloatArray ToArray(const Matrix& m) {
  FloatArray out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Norm ParseNorm(const std::string& name) {
  if (name == "l1") return Norm::kL1;
  if (name == "l2") return Norm::kL2;
  throw InvalidArgumentError("unknown norm: " + name);
}

std::optional<double> DefaultDelta(NoiseFamily family, std::optional<double> delta) {
  if (family == NoiseFamily::kGaussian && !delta) return kDefaultDelta;
  return delta;
}

py::dict ParamsDict(const SurrogateParams& p) {
  py::dict d;
  d["family"] = std::string(NoiseFamilyName(p.family));
  d["mode"] = std::string(ScaleModeName(p.mode));
  d["mu"] = p.mu;
  d["scale"] = p.scale;
  return d;
}

py::dict Attack(const FloatArray& y, const EmbeddingTable& table,
                std::shared_ptr<const PriorModel> prior, std::size_t beam_width,
                std::size_t candidate_pool, double prior_weight, const std::string& estimation,
                const std::string& family, const std::string& mode, bool estimate_mu,
                const EmbeddingTable* prior_table) {
  DecodeConfig config;
  config.beam_width = beam_width;
  config.candidate_pool = candidate_pool;
  config.prior_weight = prior_weight;
  config.estimator.method = ParseEstimationMethod(estimation);
  config.estimator.estimate_mu = estimate_mu;
  config.family = ParseNoiseFamily(family);
  config.mode = ParseScaleMode(mode);
  std::optional<TokenMap> map;
  if (prior_table != nullptr) map = BuildTokenMap(table, *prior_table);
  const Matrix observed = ToMatrix(y);
  AttackResult result;
  {
    py::gil_scoped_release release;
    result = Decode(observed, table, *prior, config, map ? &*map : nullptr);
  }
  py::dict out;
  out["decoded"] = result.decoded;
  py::list beam;
  for (const auto& hyp : result.final_beam) beam.append(py::make_tuple(hyp.ids, hyp.log_score));
  out["final_beam"] = beam;
  py::list trajectory;
  for (const auto& theta : result.theta_trajectory) trajectory.append(ParamsDict(theta));
  out["theta_trajectory"] = trajectory;
  out["scale_clamped"] = result.scale_clamped;
  return out;
}

}  // namespace
}  // namespace embinv

PYBIND11_MODULE(_core, m) {
  using namespace embinv;
  m.doc() = "Embedding obfuscation and inversion toolkit.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());

  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def(py::init([](const FloatArray& vectors, std::vector<std::string> tokens,
                       std::string table_id) {
             return EmbeddingTable::Create(ToMatrix(vectors), std::move(tokens),
                                           std::move(table_id));
           }),
           py::arg("vectors"), py::arg("tokens"), py::arg("table_id") = "")
      .def_property_readonly("vocab_size", &EmbeddingTable::vocab_size)
      .def_property_readonly("dim", &EmbeddingTable::dim)
      .def_property_readonly("tokens", &EmbeddingTable::tokens)
      .def_property_readonly("table_id", &EmbeddingTable::table_id)
      .def_property_readonly("vectors",
                             [](const EmbeddingTable& t) { return ToArray(t.vectors()); })
      .def("save", [](const EmbeddingTable& t, const std::filesystem::path& p) { SaveTable(t, p); })
      .def_static("load", &LoadTable)
      .def("__eq__", [](const EmbeddingTable& a, const EmbeddingTable& b) { return a == b; });

  m.def("generate_synthetic_table", &GenerateSyntheticTable, py::arg("vocab_size"),
        py::arg("dim"), py::arg("seed") = 0, py::arg("min_pairwise_gap") = 0.0);
  m.def("embed", [](const EmbeddingTable& t, const TokenSequence& w) {
    return ToArray(EmbedSequence(t, w));
  });
  m.def(
      "table_sensitivity",
      [](const EmbeddingTable& t, const std::string& norm) {
        return TableSensitivity(t, ParseNorm(norm));
      },
      py::arg("table"), py::arg("norm") = "l2");
  m.def(
      "nn_decode",
      [](const EmbeddingTable& t, const FloatArray& y, const std::string& norm) {
        return NearestNeighborDecode(t, ToMatrix(y), ParseNorm(norm));
      },
      py::arg("table"), py::arg("y"), py::arg("norm") = "l2");

  m.def(
      "calibrate_scale",
      [](const std::string& family, double sensitivity, double epsilon,
         std::optional<double> delta) {
        const auto f = ParseNoiseFamily(family);
        return CalibrateScale(f, sensitivity, epsilon, DefaultDelta(f, delta));
      },
      py::arg("family"), py::arg("sensitivity"), py::arg("epsilon"),
      py::arg("delta") = py::none());
  m.def(
      "epsilon_from_scale",
      [](const std::string& family, double sensitivity, double scale,
         std::optional<double> delta) {
        return EpsilonFromScale(ParseNoiseFamily(family), sensitivity, scale, delta);
      },
      py::arg("family"), py::arg("sensitivity"), py::arg("scale"),
      py::arg("delta") = py::none());
  m.def(
      "obfuscate",
      [](const EmbeddingTable& t, const TokenSequence& w, const std::string& family,
         double scale, uint64_t seed) {
        NoiseMechanismSpec spec;
        spec.family = ParseNoiseFamily(family);
        spec.scale = scale;
        return ToArray(ObfuscateSequence(t, w, spec, seed).values);
      },
      py::arg("table"), py::arg("tokens"), py::arg("family"), py::arg("scale"),
      py::arg("seed"));

  py::class_<PriorModel, std::shared_ptr<PriorModel>>(m, "PriorModel")
      .def_property_readonly("vocab_size", &PriorModel::vocab_size)
      .def_property_readonly("kind", &PriorModel::kind)
      .def("next_token_log_probs", [](const PriorModel& p, const TokenSequence& context) {
        return p.NextTokenLogProbs(context);
      });
  py::class_<UniformPrior, PriorModel, std::shared_ptr<UniformPrior>>(m, "UniformPrior")
      .def(py::init<std::size_t>());
  py::class_<NgramPrior, PriorModel, std::shared_ptr<NgramPrior>>(m, "NgramPrior")
      .def_static(
          "train",
          [](const std::vector<TokenSequence>& corpus, std::size_t vocab, std::size_t order,
             double alpha) {
            return std::make_shared<NgramPrior>(NgramPrior::Train(corpus, vocab, order, alpha));
          },
          py::arg("corpus"), py::arg("vocab_size"), py::arg("order") = 2,
          py::arg("alpha") = 0.01)
      .def_static("load",
                  [](const std::filesystem::path& p) {
                    return std::make_shared<NgramPrior>(NgramPrior::Load(p));
                  })
      .def("save", &NgramPrior::Save)
      .def_property_readonly("order", &NgramPrior::order)
      .def_property_readonly("alpha", &NgramPrior::alpha);
  m.def(
      "open_prior",
      [](const std::string& source, std::size_t vocab) {
        return std::const_pointer_cast<PriorModel>(OpenPrior(source, vocab));
      },
      py::arg("source"), py::arg("vocab_size"));

  m.def(
      "decode",
      [](const FloatArray& y, const EmbeddingTable& table, std::shared_ptr<PriorModel> prior,
         std::size_t beam_width, std::size_t candidate_pool, double prior_weight,
         const std::string& estimation, const std::string& family, const std::string& mode,
         bool estimate_mu, const EmbeddingTable* prior_table) {
        return Attack(y, table, prior, beam_width, candidate_pool, prior_weight, estimation,
                      family, mode, estimate_mu, prior_table);
      },
      py::arg("y"), py::arg("table"), py::arg("prior"), py::arg("beam_width") = 8,
      py::arg("candidate_pool") = 0, py::arg("prior_weight") = 1.0,
      py::arg("estimation") = "closed_form", py::arg("family") = "gaussian",
      py::arg("mode") = "isotropic", py::arg("estimate_mu") = false,
      py::arg("prior_table") = nullptr);

  m.def("asr", [](const TokenSequence& decoded, const TokenSequence& truth) {
    return AttackSuccessRate(decoded, truth);
  });
  m.def("pii_recovery", [](const TokenSequence& decoded, const TokenSequence& truth,
                           const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
    PiiAnnotation ann;
    for (const auto& [start, end] : spans) ann.spans.push_back({start, end});
    return PiiRecovery(decoded, truth, ann);
  });

  m.def(
      "run_sweep",
      [](const std::filesystem::path& config_path) {
        const auto config = LoadSweepConfig(config_path);
        SweepResult result;
        {
          py::gil_scoped_release release;
          result = RunSweep(config);
        }
        std::ostringstream csv;
        WriteSweepCsv(result, csv);
        return py::make_tuple(csv.str(), result.failed_cells);
      },
      py::arg("config_path"),
      "Runs a sweep config file; returns (csv_text, failed_cell_count).");
}
