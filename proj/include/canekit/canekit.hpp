#pragma once

#include "canekit/errors.hpp"
#include "canekit/rng.hpp"
#include "canekit/tensor.hpp"
#include "canekit/image.hpp"
#include "canekit/preprocess.hpp"
#include "canekit/model.hpp"
#include "canekit/md5.hpp"
#include "canekit/weights.hpp"
#include "canekit/cost.hpp"
#include "canekit/gradcam.hpp"
#include "canekit/curation.hpp"
#include "canekit/metrics.hpp"
#include "canekit/tpe.hpp"
#include "canekit/protocol.hpp"
#include "canekit/classes.hpp"
#include "canekit/recommend.hpp"
#include "canekit/bench.hpp"
#include "canekit/embeddings.hpp"
#include "canekit/service.hpp"
