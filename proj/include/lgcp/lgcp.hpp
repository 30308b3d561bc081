#ifndef LGCP_LGCP_HPP
#define LGCP_LGCP_HPP

#include "lgcp/covariance.hpp"
#include "lgcp/error.hpp"
#include "lgcp/gaussian_field.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/mc_likelihood.hpp"
#include "lgcp/mcmc.hpp"
#include "lgcp/models.hpp"
#include "lgcp/prediction.hpp"
#include "lgcp/raster.hpp"
#include "lgcp/rng.hpp"
#include "lgcp/summary_stats.hpp"
#include "lgcp/targets.hpp"

#endif  // LGCP_LGCP_HPP
