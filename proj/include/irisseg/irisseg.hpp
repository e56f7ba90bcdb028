#pragma once

#include "irisseg/align.hpp"
#include "irisseg/convex.hpp"
#include "irisseg/errors.hpp"
#include "irisseg/fields.hpp"
#include "irisseg/grid.hpp"
#include "irisseg/io.hpp"
#include "irisseg/losses.hpp"
#include "irisseg/metrics.hpp"
#include "irisseg/model.hpp"
#include "irisseg/rng.hpp"
#include "irisseg/synth.hpp"
#include "irisseg/train.hpp"
