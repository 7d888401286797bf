import { SearchClient } from "./api.js";
import { collectElements, initApp } from "./app.js";

// service base URL: ?api=http://host:port, else same origin
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
initApp(collectElements(document), new SearchClient(base));
