#pragma once

#include "patchy/albrekht.hpp"
#include "patchy/atlas.hpp"
#include "patchy/atlas_io.hpp"
#include "patchy/coeff.hpp"
#include "patchy/error.hpp"
#include "patchy/harness.hpp"
#include "patchy/level_curve.hpp"
#include "patchy/multi_index.hpp"
#include "patchy/ortho.hpp"
#include "patchy/patch.hpp"
#include "patchy/problem.hpp"
#include "patchy/riccati.hpp"
#include "patchy/svg.hpp"
#include "patchy/taylor.hpp"
