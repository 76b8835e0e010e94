#pragma once

#include "discretization.hpp"
#include "experiments.hpp"
#include "fem.hpp"
#include "kkt.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "sparse.hpp"
#include "splitting.hpp"
