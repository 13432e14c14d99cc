#pragma once

#include "hamlab/entropy.hpp"
#include "hamlab/error.hpp"
#include "hamlab/hyperbolicity.hpp"
#include "hamlab/jacobi.hpp"
#include "hamlab/linalg.hpp"
#include "hamlab/models.hpp"
#include "hamlab/ode.hpp"
#include "hamlab/reduction.hpp"
#include "hamlab/riccati.hpp"
#include "hamlab/rng.hpp"
#include "hamlab/symplectic.hpp"
#include "hamlab/version.hpp"
