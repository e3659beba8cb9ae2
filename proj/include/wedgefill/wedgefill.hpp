#pragma once

#include "wedgefill/checkpoint.hpp"
#include "wedgefill/config.hpp"
#include "wedgefill/dataset.hpp"
#include "wedgefill/diffusion.hpp"
#include "wedgefill/eval.hpp"
#include "wedgefill/fft.hpp"
#include "wedgefill/grid.hpp"
#include "wedgefill/loss.hpp"
#include "wedgefill/metrics.hpp"
#include "wedgefill/net.hpp"
#include "wedgefill/optim.hpp"
#include "wedgefill/pgm.hpp"
#include "wedgefill/phantom.hpp"
#include "wedgefill/pipeline.hpp"
#include "wedgefill/rng.hpp"
#include "wedgefill/schedule.hpp"
#include "wedgefill/tensor.hpp"
#include "wedgefill/tensor_io.hpp"
#include "wedgefill/tomo.hpp"
#include "wedgefill/tv.hpp"
