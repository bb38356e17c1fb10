// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msgan/archive.hpp"
#include "msgan/config.hpp"
#include "msgan/errors.hpp"
#include "msgan/image_io.hpp"
#include "msgan/inference.hpp"
#include "msgan/inversion.hpp"
#include "msgan/latent.hpp"
#include "msgan/losses.hpp"
#include "msgan/metrics.hpp"
#include "msgan/nets.hpp"
#include "msgan/optim.hpp"
#include "msgan/pretrain.hpp"
#include "msgan/random.hpp"
#include "msgan/stn.hpp"
#include "msgan/synthetic.hpp"
#include "msgan/tensor.hpp"
#include "msgan/trainer.hpp"

namespace msgan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace msgan
