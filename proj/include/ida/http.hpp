#pragma once

// Minimal JSON-over-HTTP client shared by the remote backends.

#include <string>
#include <string_view>

#include "ida/common.hpp"

namespace ida {

// POSTs body to base_url + path and returns the parsed JSON response.
// Connection failures raise kBackendUnavailable, read timeouts raise
// kBackendTimeout. HTTP 400 maps to kInvalidRequest, 504 to kBackendTimeout,
// any other non-2xx to kBackendUnavailable.
json http_post_json(std::string_view base_url, std::string_view path, const json& body, double timeout_s);

}  // namespace ida
