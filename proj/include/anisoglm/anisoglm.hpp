#pragma once

// Umbrella header: anatomically informed spatial priors for Bayesian
// GLM-AR(p) activation mapping.

#include "anisoglm/chain_io.hpp"
#include "anisoglm/cholesky.hpp"
#include "anisoglm/errors.hpp"
#include "anisoglm/glm.hpp"
#include "anisoglm/image.hpp"
#include "anisoglm/io.hpp"
#include "anisoglm/matrix_market.hpp"
#include "anisoglm/pipeline.hpp"
#include "anisoglm/ppm.hpp"
#include "anisoglm/prior_graph.hpp"
#include "anisoglm/render.hpp"
#include "anisoglm/rng.hpp"
#include "anisoglm/sparse.hpp"
#include "anisoglm/structure_tensor.hpp"
#include "anisoglm/synth.hpp"
