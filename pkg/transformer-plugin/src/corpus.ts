/** Task corpus ingestion: newline-delimited JSON records. */

import * as crypto from "crypto";
import * as fs from "fs";

export interface CorpusDoc {
    docId: string;
    text: string;
    relevant: boolean;
}

export interface TaskCorpus {
    docs: CorpusDoc[];
    /** hash of the raw corpus file bytes; keys the LM checkpoint cache */
    hash: string;
}

export function loadCorpus(path: string, category: string): TaskCorpus {
    const raw = fs.readFileSync(path);
    const hash = crypto.createHash("sha256").update(raw).digest("hex").slice(0, 16);
    const docs: CorpusDoc[] = [];
    const seen = new Set<string>();
    const lines = raw.toString("utf-8").split("\n");
    for (let i = 0; i < lines.length; i++) {
        const line = lines[i].trim();
        if (!line) continue;
        let record: { doc_id?: unknown; text?: unknown; categories?: unknown };
        try {
            record = JSON.parse(line);
        } catch {
            throw new Error(`corpus line ${i + 1}: not valid JSON`);
        }
        const docId = record.doc_id;
        const text = record.text;
        const categories = record.categories;
        if (typeof docId !== "string" || typeof text !== "string" || !Array.isArray(categories)) {
            throw new Error(`corpus line ${i + 1}: need doc_id, text, categories`);
        }
        if (seen.has(docId)) {
            throw new Error(`corpus line ${i + 1}: duplicate doc_id '${docId}'`);
        }
        seen.add(docId);
        docs.push({ docId, text, relevant: categories.includes(category) });
    }
    return { docs, hash };
}
