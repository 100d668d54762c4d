#pragma once

#include "fuseg/autodiff.hpp"
#include "fuseg/camera.hpp"
#include "fuseg/checkpoint.hpp"
#include "fuseg/config.hpp"
#include "fuseg/corruption.hpp"
#include "fuseg/depth.hpp"
#include "fuseg/image_io.hpp"
#include "fuseg/metrics.hpp"
#include "fuseg/model.hpp"
#include "fuseg/ops.hpp"
#include "fuseg/optim.hpp"
#include "fuseg/rng.hpp"
#include "fuseg/sampler.hpp"
#include "fuseg/scene.hpp"
#include "fuseg/tensor.hpp"
#include "fuseg/train.hpp"
