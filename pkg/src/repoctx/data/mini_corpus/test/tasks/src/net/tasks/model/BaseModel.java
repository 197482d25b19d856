package net.tasks.model;

public abstract class BaseModel {
    private final String key;

    protected BaseModel(String key) {
        this.key = key;
    }

    public String getKey() {
        return key;
    }
}
