// The only translation unit that includes cpp-httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "pcl/backend.hpp"

namespace pcl {

HttpResponse http_post_json(const std::string& base_url, const std::string& path, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s) {
  HttpResponse out;
  try {
    httplib::Client client(base_url);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.status = 0;
    out.error = e.what();
  }
  return out;
}

}  // namespace pcl
