#ifndef SAGE_SAGE_HPP
#define SAGE_SAGE_HPP

#include "sage/core.hpp"
#include "sage/dataset.hpp"
#include "sage/io.hpp"
#include "sage/mixer.hpp"
#include "sage/model.hpp"
#include "sage/rearrange.hpp"
#include "sage/rng.hpp"
#include "sage/robustness.hpp"
#include "sage/saliency.hpp"
#include "sage/train.hpp"
#include "sage/viz.hpp"

#endif  // SAGE_SAGE_HPP
