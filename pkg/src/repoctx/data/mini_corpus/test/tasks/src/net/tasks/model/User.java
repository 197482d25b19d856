package net.tasks.model;

public class User extends BaseModel {
    private final String email;

    public User(String email) {
        super("user:" + email);
        this.email = email;
    }

    public String getEmail() {
        return email;
    }
}
