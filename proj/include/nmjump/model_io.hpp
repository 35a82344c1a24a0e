#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "nmjump/io.hpp"
#include "nmjump/jaynes_cummings.hpp"
#include "nmjump/model.hpp"

namespace nmjump {

// A model ready to simulate: the spec, the pure initial state used by the
// CLI, and (for the built-in model) the JC parameters that unlock the
// closed-form reference curves.
struct LoadedModel {
  TclSpec spec;
  Vector psi0;
  std::optional<JcParams> jc;
  std::string canonical_json;  // hashed into the run manifest
};

namespace detail {

inline Matrix parse_matrix(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ValidationError(std::string(what) + ": expected a matrix of [re, im] pairs");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ValidationError(std::string(what) + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& cell = j[r][c];
      if (!cell.is_array() || cell.size() != 2)
        throw ValidationError(std::string(what) + ": entries must be [re, im]");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          Complex(cell[0].get<double>(), cell[1].get<double>());
    }
  }
  return m;
}

// A matrix-valued field is either a literal matrix or a time table
// {"times": [...], "matrices": [...]} interpolated piecewise-linearly.
inline MatrixFn parse_matrix_or_table(const nlohmann::json& j,
                                      const char* what) {
  if (j.is_object()) {
    if (!j.contains("times") || !j.contains("matrices"))
      throw ValidationError(std::string(what) +
                            ": table needs \"times\" and \"matrices\"");
    std::vector<double> times = j["times"].get<std::vector<double>>();
    std::vector<Matrix> mats;
    for (const auto& m : j["matrices"]) mats.push_back(parse_matrix(m, what));
    return TabulatedMatrix(std::move(times), std::move(mats));
  }
  return constant_op(parse_matrix(j, what));
}

inline Vector parse_state(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ValidationError(std::string(what) + ": expected a list of [re, im]");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& cell = j[i];
    if (!cell.is_array() || cell.size() != 2)
      throw ValidationError(std::string(what) + ": entries must be [re, im]");
    v[static_cast<Eigen::Index>(i)] =
        Complex(cell[0].get<double>(), cell[1].get<double>());
  }
  return v;
}

}  // namespace detail

inline LoadedModel model_from_json(const nlohmann::json& j) {
  LoadedModel out;
  if (j.contains("model")) {
    const std::string name = j["model"].get<std::string>();
    if (name != "jaynes_cummings")
      throw ValidationError("unknown built-in model: " + name);
    JcParams p;
    p.gamma0 = j.value("gamma0", 1.0);
    p.lambda = j.value("lambda", 1.0);
    p.delta = j.value("delta", 0.0);
    p.validate();
    out.spec = jc_spec(p);
    out.jc = p;
    out.psi0 = Vector::Zero(2);
    out.psi0[1] = 1.0;  // excited state
  } else {
    if (!j.contains("dim") || !j.contains("hamiltonian"))
      throw ValidationError("model file needs \"dim\" and \"hamiltonian\"");
    TclSpec spec;
    spec.dim = j["dim"].get<Eigen::Index>();
    if (spec.dim < 1) throw ValidationError("model file: dim must be >= 1");
    spec.hamiltonian =
        detail::parse_matrix_or_table(j["hamiltonian"], "hamiltonian");
    if (j.contains("channels")) {
      for (const auto& ch : j["channels"]) {
        if (!ch.contains("C") || !ch.contains("D"))
          throw ValidationError("each channel needs \"C\" and \"D\"");
        spec.channels.push_back(
            {detail::parse_matrix_or_table(ch["C"], "channel C"),
             detail::parse_matrix_or_table(ch["D"], "channel D")});
      }
    }
    // shape check at t = 0; time-dependent inputs are re-checked on use
    const std::vector<double> probe{0.0};
    const SpecReport report = validate_spec(spec, probe);
    if (!report.ok())
      throw ValidationError("model file rejected: " +
                            report.violations.front().what);
    out.spec = std::move(spec);
    if (j.contains("psi0")) {
      out.psi0 = detail::parse_state(j["psi0"], "psi0");
      if (out.psi0.size() != out.spec.dim)
        throw ValidationError("psi0 has wrong dimension");
      const double n = out.psi0.norm();
      if (!(n > 0.0)) throw ValidationError("psi0 must be nonzero");
      out.psi0 /= n;
    } else {
      out.psi0 = Vector::Zero(out.spec.dim);
      out.psi0[out.spec.dim - 1] = 1.0;
    }
  }
  out.canonical_json = j.dump();
  return out;
}

inline LoadedModel load_model_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace nmjump
