#pragma once

// Umbrella header: adversarial-input detection for feed-forward networks via
// persistent homology of input-induced computation graphs.

#include "topodetect/attack.hpp"
#include "topodetect/detection.hpp"
#include "topodetect/filtration.hpp"
#include "topodetect/idx.hpp"
#include "topodetect/induced_graph.hpp"
#include "topodetect/io.hpp"
#include "topodetect/model_io.hpp"
#include "topodetect/network.hpp"
#include "topodetect/persistence.hpp"
#include "topodetect/pipeline.hpp"
#include "topodetect/rng.hpp"
#include "topodetect/stats.hpp"
#include "topodetect/synth.hpp"
#include "topodetect/tensor.hpp"
#include "topodetect/wasserstein.hpp"
