#pragma once

#include "nova/common.hpp"
#include "nova/geometry.hpp"
#include "nova/image.hpp"
#include "nova/frame.hpp"
#include "nova/warp.hpp"
#include "nova/encoding.hpp"
#include "nova/fields.hpp"
#include "nova/renderer.hpp"
#include "nova/losses.hpp"
#include "nova/autodiff.hpp"
#include "nova/optim.hpp"
#include "nova/gradcheck.hpp"
#include "nova/model.hpp"
#include "nova/pipeline.hpp"
#include "nova/config.hpp"
#include "nova/synthetic.hpp"
#include "nova/dataset.hpp"
#include "nova/metrics.hpp"
#include "nova/trainer.hpp"
#include "nova/evaluation.hpp"
#include "nova/oracles.hpp"
#include "nova/verify.hpp"
