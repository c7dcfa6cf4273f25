#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hmmcd/error.hpp"
#include "hmmcd/model.hpp"
#include "hmmcd/random.hpp"

namespace hmmcd {

using Matrix = std::vector<std::vector<double>>;

/// Raw finite model: |Z| states, |Xi| observation symbols.
struct DiscreteModel {
  std::vector<double> pre_obs;  // f_inf over Xi
  Matrix post_obs;              // |Z| x |Xi|, row z is f_0(.|z)
  Matrix pre_trans;             // |Z| x |Z|, row z is g_inf(.|z)
  Matrix post_trans;            // |Z| x |Z|, row z is g_0(.|z)
  std::vector<double> stationary;

  std::size_t state_count() const { return stationary.size(); }
  std::size_t obs_count() const { return pre_obs.size(); }
};

namespace detail {

inline void check_distribution(const std::vector<double>& row, const std::string& key, long index,
                               std::size_t expected_size, double tol) {
  if (row.size() != expected_size)
    throw ValidationError(key, index, "expected " + std::to_string(expected_size) + " entries");
  double sum = 0.0;
  for (double v : row) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(key, index, "entries must be finite and nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) throw ValidationError(key, index, "row does not sum to 1");
}

inline void check_stochastic(const Matrix& m, const std::string& key, std::size_t rows, std::size_t cols,
                             double tol) {
  if (m.size() != rows) throw ValidationError(key, -1, "expected " + std::to_string(rows) + " rows");
  for (std::size_t r = 0; r < rows; ++r) check_distribution(m[r], key, static_cast<long>(r), cols, tol);
}

}  // namespace detail

/// Throws ValidationError naming the offending key and row.
inline void validate(const DiscreteModel& m, double tol = 1e-12) {
  const std::size_t nz = m.stationary.size();
  const std::size_t nx = m.pre_obs.size();
  if (nz == 0) throw ValidationError("stationary", -1, "model needs at least one state");
  if (nx == 0) throw ValidationError("pre_obs", -1, "model needs at least one observation symbol");
  detail::check_distribution(m.pre_obs, "pre_obs", -1, nx, tol);
  detail::check_stochastic(m.post_obs, "post_obs", nz, nx, tol);
  detail::check_stochastic(m.pre_trans, "pre_trans", nz, nz, tol);
  detail::check_stochastic(m.post_trans, "post_trans", nz, nz, tol);
  detail::check_distribution(m.stationary, "stationary", -1, nz, tol);
  long worst_row = -1;
  double worst = 0.0;
  for (std::size_t j = 0; j < nz; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < nz; ++i) s += m.stationary[i] * m.pre_trans[i][j];
    if (std::abs(s - m.stationary[j]) > worst) {
      worst = std::abs(s - m.stationary[j]);
      worst_row = static_cast<long>(j);
    }
  }
  if (worst > tol) throw ValidationError("stationary", worst_row, "vector is not invariant under pre_trans");
}

/// Validated finite change model; every expectation is an exact finite sum.
class DiscreteChangeModel {
 public:
  using state_type = std::size_t;
  using obs_type = std::size_t;

  explicit DiscreteChangeModel(DiscreteModel raw) : m_(std::move(raw)) { validate(m_); }

  const DiscreteModel& raw() const { return m_; }
  std::size_t state_count() const { return m_.state_count(); }
  std::size_t obs_count() const { return m_.obs_count(); }

  double pre_obs_density(std::size_t xi) const { return m_.pre_obs[xi]; }
  double post_obs_density(std::size_t xi, std::size_t z) const { return m_.post_obs[z][xi]; }
  double pre_transition(std::size_t z_next, std::size_t z) const { return m_.pre_trans[z][z_next]; }
  double post_transition(std::size_t z_next, std::size_t z) const { return m_.post_trans[z][z_next]; }
  double stationary_density(std::size_t z) const { return m_.stationary[z]; }

  std::size_t sample_stationary(Stream& gen) const { return gen.categorical(m_.stationary); }
  std::size_t sample_pre_transition(std::size_t z, Stream& gen) const { return gen.categorical(m_.pre_trans[z]); }
  std::size_t sample_post_transition(std::size_t z, Stream& gen) const { return gen.categorical(m_.post_trans[z]); }
  std::size_t sample_pre_obs(Stream& gen) const { return gen.categorical(m_.pre_obs); }
  std::size_t sample_post_obs(std::size_t z, Stream& gen) const { return gen.categorical(m_.post_obs[z]); }

  template <class F>
  double expect_stationary(F&& f) const {
    double s = 0.0;
    for (std::size_t z = 0; z < state_count(); ++z)
      if (m_.stationary[z] > 0.0) s += m_.stationary[z] * f(z);
    return s;
  }
  template <class F>
  double expect_pre_transition(std::size_t z_prev, F&& f) const {
    double s = 0.0;
    for (std::size_t z = 0; z < state_count(); ++z)
      if (m_.pre_trans[z_prev][z] > 0.0) s += m_.pre_trans[z_prev][z] * f(z);
    return s;
  }
  template <class F>
  double expect_post_transition(std::size_t z_prev, F&& f) const {
    double s = 0.0;
    for (std::size_t z = 0; z < state_count(); ++z)
      if (m_.post_trans[z_prev][z] > 0.0) s += m_.post_trans[z_prev][z] * f(z);
    return s;
  }

 private:
  DiscreteModel m_;
};

static_assert(ChangeModel<DiscreteChangeModel>);

inline DiscreteChangeModel make_discrete(DiscreteModel model) { return DiscreteChangeModel(std::move(model)); }

/// Exact f_0(. | z_prev) as a probability vector over Xi.
inline std::vector<double> post_conditional_obs_density(const DiscreteChangeModel& model, std::size_t z_prev) {
  const DiscreteModel& m = model.raw();
  std::vector<double> out(m.obs_count(), 0.0);
  for (std::size_t z = 0; z < m.state_count(); ++z) {
    const double w = m.post_trans[z_prev][z];
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < m.obs_count(); ++k) out[k] += w * m.post_obs[z][k];
  }
  return out;
}

/// Reads the keys pre_obs, post_obs, pre_trans, post_trans, stationary.
inline DiscreteModel discrete_model_from_json(const nlohmann::json& doc) {
  auto vec = [&](const char* key) {
    if (!doc.contains(key)) throw ValidationError(key, -1, "missing key");
    try {
      return doc.at(key).get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(key, -1, "expected an array of numbers");
    }
  };
  auto mat = [&](const char* key) {
    if (!doc.contains(key)) throw ValidationError(key, -1, "missing key");
    const auto& node = doc.at(key);
    if (!node.is_array()) throw ValidationError(key, -1, "expected an array of rows");
    Matrix out;
    for (std::size_t r = 0; r < node.size(); ++r) {
      try {
        out.push_back(node[r].get<std::vector<double>>());
      } catch (const nlohmann::json::exception&) {
        throw ValidationError(key, static_cast<long>(r), "expected an array of numbers");
      }
    }
    return out;
  };
  DiscreteModel m;
  m.pre_obs = vec("pre_obs");
  m.post_obs = mat("post_obs");
  m.pre_trans = mat("pre_trans");
  m.post_trans = mat("post_trans");
  m.stationary = vec("stationary");
  return m;
}

inline nlohmann::json to_json(const DiscreteModel& m) {
  return {{"pre_obs", m.pre_obs},
          {"post_obs", m.post_obs},
          {"pre_trans", m.pre_trans},
          {"post_trans", m.post_trans},
          {"stationary", m.stationary}};
}

inline DiscreteModel load_discrete_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("document", -1, std::string("invalid JSON: ") + e.what());
  }
  return discrete_model_from_json(doc);
}

/// Stationary vector of a row-stochastic matrix by power iteration.
inline std::vector<double> stationary_by_power_iteration(const Matrix& trans, int iterations = 100000,
                                                         double tol = 1e-15) {
  const std::size_t n = trans.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n)), next(n);
  for (int it = 0; it < iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[j] += p[i] * trans[i][j];
    double s = 0.0, diff = 0.0;
    for (double v : next) s += v;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= s;
      diff = std::max(diff, std::abs(next[j] - p[j]));
    }
    p.swap(next);
    if (diff < tol) break;
  }
  return p;
}

}  // namespace hmmcd
