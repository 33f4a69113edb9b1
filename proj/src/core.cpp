#include "fsilab/core.hpp"

#include "fsilab/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace fsilab {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInput(std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

int Cap::limit() const { return limit_.value_or(std::numeric_limits<int>::max()); }

std::string Cap::to_string() const {
  return limit_ ? std::to_string(*limit_) : std::string("inf");
}

Cap Cap::parse(const std::string& text) {
  if (text == "inf") return Cap::unbounded();
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 1) {
    throw InvalidInput("invalid iteration cap '" + text + "' (expected integer >= 1 or 'inf')");
  }
  return Cap(value);
}

InterfaceField::InterfaceField(Vector values, FieldRole role)
    : values_(std::move(values)), role_(role) {
  if (values_.size() < 1) throw InvalidInput("interface field must have at least one entry");
  require_finite(values_, "interface field");
}

InterfaceField InterfaceField::zeros(Eigen::Index n, FieldRole role) {
  return InterfaceField(Vector::Zero(n), role);
}

void IterationCounters::add_step(const StepCounts& counts) {
  if (counts.coupling < 0 || counts.flow < 0 || counts.solid < 0) {
    throw InvalidInput("iteration counts must be non-negative");
  }
  coupling_ += counts.coupling;
  flow_ += counts.flow;
  solid_ += counts.solid;
  per_step_.push_back(counts);
}

void CouplingConfig::validate() const {
  if (n_max_f.bounded() && n_max_f.limit() < 1) throw InvalidInput("n_max_f must be >= 1");
  if (n_max_s.bounded() && n_max_s.limit() < 1) throw InvalidInput("n_max_s must be >= 1");
  if (!(eps_f > 0) || !(eps_s > 0) || !(eps_fil > 0)) {
    throw InvalidInput("tolerances eps_f, eps_s, eps_fil must be positive");
  }
  if (reuse_q < 0) throw InvalidInput("reuse_q must be non-negative");
  if (!(omega0 > 0) || omega0 > 1) throw InvalidInput("omega0 must lie in (0, 1]");
  if (max_coupling_iters_per_step < 1) throw InvalidInput("max_coupling_iters_per_step must be >= 1");
  if (batch_size_f < 1) throw InvalidInput("batch_size_f must be >= 1");
  if (criterion.mode == CriterionMode::FixedPointNorm && !(criterion.eps_c > 0)) {
    throw InvalidInput("eps_c must be positive");
  }
}

double residual_norm(const Vector& r, Eigen::Index n) {
  if (r.size() == 0) throw InvalidInput("residual_norm of an empty vector");
  if (n != r.size()) throw InvalidInput("residual_norm: n does not match the vector length");
  require_finite(r, "residual");
  return r.norm() / std::sqrt(static_cast<double>(n));
}

Vector fixed_point_residual(const InterfaceField& d_tilde, const InterfaceField& d) {
  if (d_tilde.role() != FieldRole::Displacement || d.role() != FieldRole::Displacement) {
    throw ContractViolation("fixed-point residual needs two displacement fields");
  }
  if (d_tilde.size() != d.size()) {
    throw ContractViolation("fixed-point residual: field lengths differ");
  }
  return d_tilde.values() - d.values();
}

double deviation_from_reference(const Vector& d, const Vector& d_ref) {
  if (d.size() != d_ref.size() || d.size() == 0) {
    throw ContractViolation("deviation: field lengths differ");
  }
  return (d - d_ref).norm() / std::sqrt(static_cast<double>(d.size()));
}

double deviation_from_reference(const InterfaceField& d, const InterfaceField& d_ref) {
  if (d.role() != FieldRole::Displacement || d_ref.role() != FieldRole::Displacement) {
    throw ContractViolation("deviation needs two displacement fields");
  }
  return deviation_from_reference(d.values(), d_ref.values());
}

std::string to_string(Acceleration accel) {
  switch (accel) {
    case Acceleration::Constant: return "constant";
    case Acceleration::Aitken: return "aitken";
    case Acceleration::IQNILS: return "iqn-ils";
  }
  return "?";
}

Acceleration parse_acceleration(const std::string& text) {
  if (text == "constant") return Acceleration::Constant;
  if (text == "aitken") return Acceleration::Aitken;
  if (text == "iqn-ils" || text == "iqnils") return Acceleration::IQNILS;
  throw InvalidInput("unknown acceleration '" + text + "'");
}

}  // namespace fsilab
