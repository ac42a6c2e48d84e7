#ifndef SVYFOSR_FAMILY_HPP
#define SVYFOSR_FAMILY_HPP

#include <cmath>
#include <string>

#include "svyfosr/errors.hpp"

namespace svyfosr {

// Exponential family with canonical link: identity, logit, or log.
enum class Family { Gaussian, Bernoulli, Poisson };

inline Family family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "bernoulli" || s == "binomial") return Family::Bernoulli;
  if (s == "poisson") return Family::Poisson;
  throw SchemaError("unknown family '" + s + "'");
}

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::Poisson: return "poisson";
  }
  return "?";
}

inline double link(Family f, double mu) {
  switch (f) {
    case Family::Gaussian: return mu;
    case Family::Bernoulli: return std::log(mu / (1.0 - mu));
    case Family::Poisson: return std::log(mu);
  }
  return 0.0;
}

inline double inv_link(Family f, double eta) {
  switch (f) {
    case Family::Gaussian: return eta;
    case Family::Bernoulli: return 1.0 / (1.0 + std::exp(-eta));
    case Family::Poisson: return std::exp(eta);
  }
  return 0.0;
}

// Variance function V(mu); equals dmu/deta for these canonical links.
inline double variance(Family f, double mu) {
  switch (f) {
    case Family::Gaussian: return 1.0;
    case Family::Bernoulli: return mu * (1.0 - mu);
    case Family::Poisson: return mu;
  }
  return 0.0;
}

}  // namespace svyfosr

#endif
