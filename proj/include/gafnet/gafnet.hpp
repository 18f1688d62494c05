#pragma once

#include "gafnet/bench_profile.hpp"
#include "gafnet/complex_nn.hpp"
#include "gafnet/data_synthesis.hpp"
#include "gafnet/decoder_ratf.hpp"
#include "gafnet/encoder_fusion.hpp"
#include "gafnet/error.hpp"
#include "gafnet/gafm.hpp"
#include "gafnet/gammatone.hpp"
#include "gafnet/losses_metrics.hpp"
#include "gafnet/model.hpp"
#include "gafnet/model_io.hpp"
#include "gafnet/pipeline.hpp"
#include "gafnet/report.hpp"
#include "gafnet/stft.hpp"
#include "gafnet/tensor.hpp"
#include "gafnet/wav.hpp"
