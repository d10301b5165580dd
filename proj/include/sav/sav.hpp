#pragma once

#include "sav/error.hpp"
#include "sav/numerics/grid.hpp"
#include "sav/numerics/rng.hpp"
#include "sav/numerics/kernels.hpp"
#include "sav/numerics/tape.hpp"
#include "sav/numerics/ops.hpp"
#include "sav/numerics/grad_check.hpp"
#include "sav/numerics/params.hpp"
#include "sav/schedule.hpp"
#include "sav/autoencoder.hpp"
#include "sav/attention.hpp"
#include "sav/denoiser.hpp"
#include "sav/guidance.hpp"
#include "sav/structure.hpp"
#include "sav/frames.hpp"
#include "sav/dataset.hpp"
#include "sav/temporal.hpp"
#include "sav/metrics.hpp"
#include "sav/sampler.hpp"
#include "sav/pipeline.hpp"
#include "sav/config.hpp"
#include "sav/io/container.hpp"
#include "sav/io/pgm.hpp"
#include "sav/io/models.hpp"
