import { ApiClient } from "./api.js";
import { App } from "./app.js";

// Default service address; override by assigning window.CRYSTALBALL_API
// before this module loads.
const DEFAULT_BASE = "http://127.0.0.1:8675";

const root = document.querySelector<HTMLElement>("#app");
if (root === null) {
  throw new Error("missing #app container");
}
const override = (window as { CRYSTALBALL_API?: string }).CRYSTALBALL_API;
void new App(root, new ApiClient(override ?? DEFAULT_BASE)).init();
