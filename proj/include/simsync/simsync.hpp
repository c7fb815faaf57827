#pragma once

// Umbrella header.

#include "simsync/bench.hpp"
#include "simsync/enkf.hpp"
#include "simsync/errors.hpp"
#include "simsync/grid.hpp"
#include "simsync/nodes.hpp"
#include "simsync/protocol.hpp"
#include "simsync/quality.hpp"
#include "simsync/random.hpp"
#include "simsync/solvers.hpp"
#include "simsync/tcp.hpp"
#include "simsync/transport.hpp"
