#pragma once

#include "epskit/commands.hpp"
#include "epskit/config.hpp"
#include "epskit/constants.hpp"
#include "epskit/count_csv.hpp"
#include "epskit/displacer.hpp"
#include "epskit/entanglement.hpp"
#include "epskit/error.hpp"
#include "epskit/materials.hpp"
#include "epskit/overlap.hpp"
#include "epskit/phasematch.hpp"
#include "epskit/roots.hpp"
#include "epskit/stability.hpp"
#include "epskit/wedges.hpp"
