import { ApiClient } from "./api.js";
import { App } from "./ui.js";

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app root");
  const app = new App(root, new ApiClient(""));

  // reloading with #session=<id> reconstructs the identical view from GETs
  const match = /#session=([0-9a-f]+)/.exec(window.location.hash);
  if (match) {
    void app.loadExisting(match[1]);
  }

  // expose for debugging and scripted drivers
  (window as unknown as { promptga: App }).promptga = app;
}

window.addEventListener("DOMContentLoaded", bootstrap);
