#include "lgpc/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include "lgpc/error.hpp"

namespace lgpc {

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInput("norm_quantile: probability must lie strictly inside (0,1)");
    }
    static const boost::math::normal standard;
    return boost::math::quantile(standard, p);
}

}  // namespace lgpc
