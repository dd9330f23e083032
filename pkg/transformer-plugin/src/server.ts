/** Stdio protocol loop: one JSON request per line on stdin, one JSON
 * response per line on stdout, strictly ordered. Handler exceptions become
 * {"ok": false, "error": ...} responses; the process stays alive for the
 * next command.
 */

import { parseConfig, PluginConfig } from "./config";
import { loadCorpus } from "./corpus";
import {
    clsFinetune,
    initializeForCorpus,
    LabeledDoc,
    PluginState,
    scoreAll,
} from "./trainer";

export const PROTOCOL_VERSION = 1;
export const PLUGIN_NAME = "mini-transformer";

interface Request {
    cmd?: string;
    protocol?: number;
    config?: Record<string, unknown>;
    path?: string;
    category?: string;
    labeled?: { doc_id?: unknown; label?: unknown }[];
}

export class PluginServer {
    private config: PluginConfig | null = null;
    private state: PluginState | null = null;

    handle(request: Request): { response: object; shutdown: boolean } {
        try {
            switch (request.cmd) {
                case "init":
                    return { response: this.onInit(request), shutdown: false };
                case "load_corpus":
                    return { response: this.onLoadCorpus(request), shutdown: false };
                case "fit":
                    return { response: this.onFit(request), shutdown: false };
                case "score":
                    return { response: this.onScore(), shutdown: false };
                case "shutdown":
                    return { response: { ok: true }, shutdown: true };
                default:
                    return {
                        response: { ok: false, error: `unknown command '${request.cmd}'` },
                        shutdown: false,
                    };
            }
        } catch (err) {
            const message = err instanceof Error ? err.message : String(err);
            return { response: { ok: false, error: message }, shutdown: false };
        }
    }

    private onInit(request: Request): object {
        if (request.protocol !== PROTOCOL_VERSION) {
            return { ok: false, error: `unsupported protocol ${request.protocol}` };
        }
        this.config = parseConfig(request.config ?? {});
        return { ok: true, name: PLUGIN_NAME };
    }

    private onLoadCorpus(request: Request): object {
        if (this.config === null) {
            return { ok: false, error: "load_corpus before init" };
        }
        if (typeof request.path !== "string" || typeof request.category !== "string") {
            return { ok: false, error: "load_corpus needs 'path' and 'category'" };
        }
        const corpus = loadCorpus(request.path, request.category);
        // one-time LM fine-tune happens here (cached by corpus hash + epochs)
        this.state = initializeForCorpus(this.config, corpus);
        return { ok: true, n_docs: corpus.docs.length };
    }

    private onFit(request: Request): object {
        if (this.state === null) {
            return { ok: false, error: "fit before load_corpus" };
        }
        if (!Array.isArray(request.labeled)) {
            return { ok: false, error: "fit needs a 'labeled' array" };
        }
        const byId = new Map(this.state.docIds.map((id, i) => [id, i]));
        const labeled: LabeledDoc[] = [];
        for (const entry of request.labeled) {
            if (entry.label !== 0 && entry.label !== 1) {
                return { ok: false, error: `label outside {0,1}: ${JSON.stringify(entry.label)}` };
            }
            const seqIndex = byId.get(entry.doc_id as string);
            if (seqIndex === undefined) {
                return { ok: false, error: `unknown doc_id '${entry.doc_id}'` };
            }
            labeled.push({ seqIndex, label: entry.label });
        }
        const started = Date.now();
        clsFinetune(this.state, labeled);
        return { ok: true, train_seconds: (Date.now() - started) / 1000 };
    }

    private onScore(): object {
        if (this.state === null) {
            return { ok: false, error: "score before load_corpus" };
        }
        if (!this.state.trained) {
            return { ok: false, error: "score before any fit" };
        }
        return { ok: true, scores: scoreAll(this.state) };
    }
}

/** Run the line loop over the given streams until shutdown or EOF. */
export function serve(
    input: NodeJS.ReadableStream,
    output: NodeJS.WritableStream,
    onExit: (code: number) => void
): void {
    const server = new PluginServer();
    let buffer = "";
    input.setEncoding("utf8");
    input.on("data", (chunk: string) => {
        buffer += chunk;
        let newline = buffer.indexOf("\n");
        while (newline >= 0) {
            const line = buffer.slice(0, newline).trim();
            buffer = buffer.slice(newline + 1);
            if (line.length > 0) {
                let outcome: { response: object; shutdown: boolean };
                try {
                    outcome = server.handle(JSON.parse(line));
                } catch {
                    outcome = {
                        response: { ok: false, error: "request is not valid JSON" },
                        shutdown: false,
                    };
                }
                output.write(JSON.stringify(outcome.response) + "\n");
                if (outcome.shutdown) {
                    onExit(0);
                    return;
                }
            }
            newline = buffer.indexOf("\n");
        }
    });
    input.on("end", () => onExit(0));
}
