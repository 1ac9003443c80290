#pragma once

#include "rma/complexity.hpp"
#include "rma/error.hpp"
#include "rma/kernels.hpp"
#include "rma/matrix.hpp"
#include "rma/matrix_io.hpp"
#include "rma/qr.hpp"
#include "rma/random.hpp"
#include "rma/runtime/drop.hpp"
#include "rma/runtime/expand.hpp"
#include "rma/runtime/message.hpp"
#include "rma/runtime/node.hpp"
#include "rma/scalar.hpp"
#include "rma/sim/simcluster.hpp"
