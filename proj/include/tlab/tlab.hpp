#pragma once

#include "tlab/numcore/adam.hpp"
#include "tlab/numcore/gradcheck.hpp"
#include "tlab/numcore/kernels.hpp"
#include "tlab/numcore/ops.hpp"
#include "tlab/numcore/rng.hpp"
#include "tlab/numcore/tensor.hpp"

#include "tlab/layout/attention_mask.hpp"
#include "tlab/layout/conflicts.hpp"
#include "tlab/layout/framework.hpp"
#include "tlab/layout/incremental.hpp"
#include "tlab/layout/layout.hpp"
#include "tlab/layout/masks.hpp"

#include "tlab/transformer/config.hpp"
#include "tlab/transformer/model.hpp"
#include "tlab/transformer/params.hpp"

#include "tlab/objectives/corruption.hpp"
#include "tlab/objectives/example.hpp"
#include "tlab/objectives/examples.hpp"
#include "tlab/objectives/loss.hpp"

#include "tlab/data/batching.hpp"
#include "tlab/data/corpus.hpp"
#include "tlab/data/synth.hpp"
#include "tlab/data/vocab.hpp"

#include "tlab/models/checkpoint.hpp"
#include "tlab/models/init.hpp"
#include "tlab/models/train.hpp"

#include "tlab/decode/beam.hpp"
#include "tlab/decode/cache.hpp"
#include "tlab/decode/generate.hpp"
#include "tlab/decode/inference.hpp"

#include "tlab/metrics/bleu.hpp"
#include "tlab/metrics/cider.hpp"
#include "tlab/metrics/diversity.hpp"
#include "tlab/metrics/report.hpp"
#include "tlab/metrics/ttest.hpp"
