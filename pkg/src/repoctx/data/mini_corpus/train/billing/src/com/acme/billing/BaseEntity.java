package com.acme.billing;

/**
 * Common identity for persisted objects.
 */
public abstract class BaseEntity {
    protected long id;
    protected String createdBy = "system";

    public long getId() {
        return id;
    }

    public void setId(long id) {
        this.id = id;
    }
}
