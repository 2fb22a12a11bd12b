// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/config.hpp"

#include <cmath>

#include <fmt/format.h>

#include "efdmp/error.hpp"

namespace efdmp {

std::size_t ModelConfig::total_atoms() const {
  std::size_t total = 0;
  for (const auto& cls : classes) total += static_cast<std::size_t>(std::max(cls.h_max, 0));
  return total;
}

double ModelConfig::alpha_total() const {
  double total = 0.0;
  for (const auto& cls : classes) total += cls.alpha;
  return total;
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.classes.empty()) {
    throw Error(ErrorKind::InvalidConfig, "model needs at least one functional class");
  }
  if (!(cfg.a_sigma > 0.0) || !std::isfinite(cfg.a_sigma)) {
    throw Error(ErrorKind::InvalidConfig, "a_sigma must be positive");
  }
  if (!(cfg.b_sigma > 0.0) || !std::isfinite(cfg.b_sigma)) {
    throw Error(ErrorKind::InvalidConfig, "b_sigma must be positive");
  }
  if (cfg.noise_precision && !(*cfg.noise_precision > 0.0 && std::isfinite(*cfg.noise_precision))) {
    throw Error(ErrorKind::InvalidConfig, "noise_precision must be positive when set");
  }
  for (std::size_t l = 0; l < cfg.classes.size(); ++l) {
    const ClassConfig& cls = cfg.classes[l];
    const std::string where = fmt::format("class {}", l + 1);
    if (!(cls.alpha > 0.0) || !std::isfinite(cls.alpha)) {
      throw Error(ErrorKind::InvalidConfig, where + ": alpha must be positive");
    }
    if (!(cls.c > 0.0) || !std::isfinite(cls.c)) {
      throw Error(ErrorKind::InvalidConfig, where + ": c must be positive");
    }
    if (cls.h_max < 1) {
      throw Error(ErrorKind::InvalidConfig, where + ": h_max must be at least 1");
    }
    try {
      validate_basis(cls.basis);
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.detail());
    }
    const auto m = static_cast<Eigen::Index>(cls.dimension());
    if (cls.prior_mean.size() != m) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("{}: prior_mean has length {} but the basis has dimension {}", where,
                              cls.prior_mean.size(), m));
    }
    if (cls.prior_cov.rows() != m || cls.prior_cov.cols() != m) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("{}: prior_cov is {}x{} but the basis has dimension {}", where,
                              cls.prior_cov.rows(), cls.prior_cov.cols(), m));
    }
    if (!cls.prior_mean.allFinite() || !cls.prior_cov.allFinite()) {
      throw Error(ErrorKind::InvalidConfig, where + ": prior has non-finite entries");
    }
    const double scale = std::max(1.0, cls.prior_cov.cwiseAbs().maxCoeff());
    if ((cls.prior_cov - cls.prior_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw Error(ErrorKind::NotPositiveDefinite, where + ": prior_cov is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cls.prior_cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::NotPositiveDefinite, where + ": prior_cov is not positive definite");
    }
  }
}

AtomLayout::AtomLayout(const ModelConfig& cfg) {
  for (const auto& cls : cfg.classes) {
    offsets_.push_back(total_);
    sizes_.push_back(static_cast<std::size_t>(cls.h_max));
    total_ += static_cast<std::size_t>(cls.h_max);
  }
}

ClusterLabel AtomLayout::label(std::size_t column) const {
  for (std::size_t l = 0; l < sizes_.size(); ++l) {
    if (column < offsets_[l] + sizes_[l]) return {l, column - offsets_[l]};
  }
  throw Error(ErrorKind::InconsistentState, fmt::format("column {} out of range", column));
}

}  // namespace efdmp
