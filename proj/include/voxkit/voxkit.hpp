#pragma once

#include "voxkit/clustering.hpp"
#include "voxkit/common.hpp"
#include "voxkit/decomposition.hpp"
#include "voxkit/feature_selection.hpp"
#include "voxkit/linear_model.hpp"
#include "voxkit/model_selection.hpp"
#include "voxkit/nifti.hpp"
#include "voxkit/pipeline.hpp"
#include "voxkit/render.hpp"
#include "voxkit/searchlight.hpp"
#include "voxkit/signal.hpp"
#include "voxkit/synth.hpp"
#include "voxkit/volume.hpp"
