/** Typed client for the annotation service HTTP API. */

export interface Progress {
    done: number
    remaining: number
}

export interface UiItem {
    item_id: string
    stated_premise: string
    stated_claim: string
    candidate_premise: string
    required_judges: number
    progress: Progress
}

export type NextResult =
    | { kind: 'item'; item: UiItem }
    | { kind: 'done' }

export type SubmitResult = 'accepted' | 'conflict'

export class ApiError extends Error {
    constructor(message: string, readonly status?: number) {
        super(message)
    }
}

function baseUrl(): string {
    const override = (globalThis as { __API_BASE__?: string }).__API_BASE__
    return override ?? ''
}

export async function fetchNextItem(annotatorId: string): Promise<NextResult> {
    const response = await fetch(
        `${baseUrl()}/items/next?annotator=${encodeURIComponent(annotatorId)}`,
    )
    if (response.status === 204) {
        return { kind: 'done' }
    }
    if (!response.ok) {
        throw new ApiError(`fetching next item failed (${response.status})`, response.status)
    }
    const item: UiItem = await response.json()
    return { kind: 'item', item }
}

export async function submitJudgment(
    itemId: string,
    annotatorId: string,
    plausible: boolean,
): Promise<SubmitResult> {
    const response = await fetch(`${baseUrl()}/judgments`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ item_id: itemId, annotator_id: annotatorId, plausible }),
    })
    if (response.status === 201) {
        return 'accepted'
    }
    if (response.status === 409) {
        return 'conflict'
    }
    throw new ApiError(`submitting judgment failed (${response.status})`, response.status)
}
