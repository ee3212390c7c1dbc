#pragma once

#include "falqon/errors.hpp"
#include "falqon/pauli.hpp"
#include "falqon/hubbard.hpp"
#include "falqon/state.hpp"
#include "falqon/pauli_action.hpp"
#include "falqon/operator.hpp"
#include "falqon/krylov.hpp"
#include "falqon/norm.hpp"
#include "falqon/evolution.hpp"
#include "falqon/snapshot.hpp"
#include "falqon/spectral.hpp"
#include "falqon/controller.hpp"
#include "falqon/csv.hpp"
#include "falqon/config.hpp"
#include "falqon/svg.hpp"
#include "falqon/experiment.hpp"
