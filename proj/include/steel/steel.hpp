#pragma once

#include "steel/error.hpp"
#include "steel/tensor.hpp"
#include "steel/layer_id.hpp"
#include "steel/sha256.hpp"
#include "steel/weights_io.hpp"
#include "steel/vgg.hpp"
#include "steel/style_loss.hpp"
#include "steel/adam.hpp"
#include "steel/image_io.hpp"
#include "steel/config.hpp"
#include "steel/runner.hpp"
#include "steel/sweep.hpp"
#include "steel/gradcheck.hpp"
