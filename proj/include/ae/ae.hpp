#pragma once

#include "ae/arith.hpp"
#include "ae/asm.hpp"
#include "ae/deck.hpp"
#include "ae/error.hpp"
#include "ae/tmc.hpp"
#include "ae/vm.hpp"
