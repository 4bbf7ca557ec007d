#pragma once

// Everything except the socket bridge, which pulls in Boost.Asio/Beast:
// include "teleop/bridge.hpp" separately where it is needed.

#include "teleop/actuation.hpp"
#include "teleop/bus.hpp"
#include "teleop/config.hpp"
#include "teleop/errors.hpp"
#include "teleop/geometry.hpp"
#include "teleop/locomotion.hpp"
#include "teleop/nodes.hpp"
#include "teleop/pipeline.hpp"
#include "teleop/retargeting.hpp"
#include "teleop/robot_model.hpp"
#include "teleop/skeleton.hpp"
#include "teleop/stream_io.hpp"
#include "teleop/synth.hpp"
#include "teleop/wire.hpp"
