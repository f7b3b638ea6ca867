#pragma once

#include "mipeaks/error.hpp"
#include "mipeaks/hsic.hpp"
#include "mipeaks/info_bounds.hpp"
#include "mipeaks/matrix.hpp"
#include "mipeaks/model_io.hpp"
#include "mipeaks/toy_experiments.hpp"
#include "mipeaks/toy_generate.hpp"
#include "mipeaks/toy_model.hpp"
#include "mipeaks/toy_task.hpp"
#include "mipeaks/toy_train.hpp"
#include "mipeaks/trace.hpp"
#include "mipeaks/trace_io.hpp"
#include "mipeaks/trajectory.hpp"
