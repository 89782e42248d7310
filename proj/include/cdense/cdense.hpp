#pragma once

#include "cdense/corpus.hpp"
#include "cdense/detector.hpp"
#include "cdense/error.hpp"
#include "cdense/eval.hpp"
#include "cdense/features.hpp"
#include "cdense/labeling.hpp"
#include "cdense/learn.hpp"
#include "cdense/model_io.hpp"
#include "cdense/summcomb.hpp"
#include "cdense/synthetic.hpp"
