#include "ida/http.hpp"

#include <cmath>

#include "httplib.h"

namespace ida {

json http_post_json(std::string_view base_url, std::string_view path, const json& body, double timeout_s) {
  httplib::Client client{std::string(base_url)};
  const auto secs = static_cast<time_t>(std::floor(timeout_s));
  const auto usecs = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(std::string(path), body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = std::string(base_url) + std::string(path) + ": " + httplib::to_string(err);
    if (err == httplib::Error::Read) throw Error(ErrorKind::kBackendTimeout, what);
    throw Error(ErrorKind::kBackendUnavailable, what);
  }
  if (res->status < 200 || res->status >= 300) {
    const std::string what = std::string(path) + " returned HTTP " + std::to_string(res->status) + ": " + res->body;
    if (res->status == 400) throw Error(ErrorKind::kInvalidRequest, what);
    if (res->status == 504) throw Error(ErrorKind::kBackendTimeout, what);
    throw Error(ErrorKind::kBackendUnavailable, what);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string(path) + ": malformed response: " + e.what());
  }
}

}  // namespace ida
