#pragma once

#include "sparsemirror/argmax_tracker.hpp"
#include "sparsemirror/expectation.hpp"
#include "sparsemirror/iterate.hpp"
#include "sparsemirror/matrix_market.hpp"
#include "sparsemirror/oracles.hpp"
#include "sparsemirror/prox.hpp"
#include "sparsemirror/random.hpp"
#include "sparsemirror/report.hpp"
#include "sparsemirror/sampling.hpp"
#include "sparsemirror/solvers.hpp"
#include "sparsemirror/sparse_matrix.hpp"
#include "sparsemirror/trajectory_oracles.hpp"
