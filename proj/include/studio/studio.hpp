#pragma once

#include "studio/canonical_json.hpp"
#include "studio/codec.hpp"
#include "studio/error.hpp"
#include "studio/image.hpp"
#include "studio/pyramid.hpp"
#include "studio/render.hpp"
#include "studio/timeline.hpp"
#include "studio/tour.hpp"
