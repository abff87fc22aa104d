#pragma once

#include "detkit/anchors.hpp"
#include "detkit/datasets.hpp"
#include "detkit/error.hpp"
#include "detkit/evalmap.hpp"
#include "detkit/geometry.hpp"
#include "detkit/gradcheck.hpp"
#include "detkit/losshead.hpp"
#include "detkit/shapes.hpp"
#include "detkit/wordtree.hpp"
