import { FetchLike, ServiceClient } from "./api.js";
import { initPlayground } from "./app.js";

function configuredBaseUrl(): string {
  const meta = document.querySelector('meta[name="service-base-url"]');
  return meta?.getAttribute("content") || "http://127.0.0.1:8000";
}

const client = new ServiceClient(
  configuredBaseUrl(),
  window.fetch.bind(window) as FetchLike,
);
const controller = initPlayground(document, client);
void controller.refreshHealth();
