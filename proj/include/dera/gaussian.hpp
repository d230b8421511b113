#pragma once

#include <cstddef>
#include <vector>

#include "dera/errors.hpp"

namespace dera {

/// One reverse-step Gaussian: mean in R^D with isotropic (single entry) or
/// diagonal (D entries) variance.
struct PosteriorGaussian {
    std::vector<double> mean;
    std::vector<double> var;

    std::size_t dim() const { return mean.size(); }
    bool isotropic() const { return var.size() == 1; }

    double var_at(std::size_t i) const { return isotropic() ? var[0] : var[i]; }

    void validate() const {
        if (mean.empty()) throw ShapeError("PosteriorGaussian: empty mean");
        if (var.size() != 1 && var.size() != mean.size())
            throw ShapeError("PosteriorGaussian: variance must be scalar or one per coordinate");
        for (double v : var)
            if (!(v > 0.0)) throw NonPositiveDefiniteError("PosteriorGaussian: variance must be positive");
    }
};

inline PosteriorGaussian make_isotropic(std::vector<double> mean, double var) {
    return PosteriorGaussian{std::move(mean), {var}};
}

} // namespace dera
