#pragma once

#include "lssbalred/linalg.hpp"
#include "lssbalred/model.hpp"
#include "lssbalred/model_io.hpp"
#include "lssbalred/lmi.hpp"
#include "lssbalred/families.hpp"
#include "lssbalred/realization.hpp"
#include "lssbalred/stability.hpp"
#include "lssbalred/grammians.hpp"
#include "lssbalred/balred.hpp"
#include "lssbalred/gain.hpp"
#include "lssbalred/simulate.hpp"
#include "lssbalred/embeddings.hpp"
